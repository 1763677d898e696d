use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{ActionRecord, AgentConfig, ExecutionTrace, TestCase, Verdict};
use crate::device::sim::{check_goal, SimAppSpec, SimSession};
use crate::device::{DeviceError, DeviceSession};
use crate::llm::{record_exchange, LlmBackend, LlmRequest, RecorderSink, StepMeta};
use crate::prompt::{
    build_prompt, parse_decision, render_history_line, retry_prompt, validate_decision,
    PromptContext, ValidatedAction,
};
use crate::screen::{refine_source, resolve_locator, RefinedScreen};
use crate::{now_millis, Action};

/// True iff `candidate` was already taken from a screen with this hash.
/// Back and scrolling never count.
pub fn detect_repeat(history: &[ActionRecord], candidate: &Action, screen_hash: &str) -> bool {
    !candidate.is_navigation()
        && history
            .iter()
            .any(|r| r.screen_hash_before == screen_hash && r.action == *candidate)
}

fn repeat_count(history: &[ActionRecord], candidate: &Action, screen_hash: &str) -> usize {
    if candidate.is_navigation() {
        return 0;
    }
    history
        .iter()
        .filter(|r| r.screen_hash_before == screen_hash && r.action == *candidate)
        .count()
}

fn capture(device: &mut dyn DeviceSession) -> Result<RefinedScreen, Verdict> {
    let raw = device
        .capture_source()
        .map_err(|e| Verdict::BackendFailure(format!("capture: {e}")))?;
    refine_source(&raw).map_err(|e| Verdict::BackendFailure(format!("screen: {e}")))
}

struct Decided {
    action: ValidatedAction,
    prompt: String,
    raw: String,
    llm_ms: u64,
}

fn decide(
    base_prompt: &str,
    screen: &RefinedScreen,
    llm: &dyn LlmBackend,
    cfg: &AgentConfig,
    meta_step: (&str, u32),
    recorder: &mut Option<&mut RecorderSink>,
) -> Result<Decided, Verdict> {
    let mut llm_ms = 0;
    let mut prompt = base_prompt.to_string();
    let mut last_err = None;
    for attempt in 1..=1 + cfg.parse_retry_limit {
        let mut req = LlmRequest::new(prompt.clone(), cfg.model.clone());
        req.temperature = cfg.temperature;
        req.timeout = Duration::from_secs(cfg.llm_timeout_secs.max(1));
        let resp = llm
            .complete(&req)
            .map_err(|e| Verdict::BackendFailure(format!("llm: {e}")))?;
        llm_ms += resp.latency_ms;
        if let Some(sink) = recorder.as_deref_mut() {
            let meta = StepMeta {
                trace_id: meta_step.0.to_string(),
                step: meta_step.1,
                attempt,
            };
            record_exchange(sink, &req, &resp, &meta)
                .map_err(|e| Verdict::BackendFailure(format!("recorder: {e}")))?;
        }
        match parse_decision(&resp.raw_text).and_then(|d| validate_decision(&d, screen)) {
            Ok(action) => {
                return Ok(Decided {
                    action,
                    prompt,
                    raw: resp.raw_text,
                    llm_ms,
                })
            }
            Err(e) => {
                log::debug!("step {} attempt {attempt}: {e}", meta_step.1);
                prompt = retry_prompt(base_prompt, &e.to_string());
                last_err = Some(e);
            }
        }
    }
    let err = last_err.expect("at least one attempt");
    Err(Verdict::DecisionFailure(format!(
        "{} attempt(s) without a usable decision; last error: {err}",
        1 + cfg.parse_retry_limit
    )))
}

/// Runs one test to a verdict.
///
/// Each iteration captures and refines the screen, asks the model for one
/// decision (re-asking up to `parse_retry_limit` times on unusable answers)
/// and executes it. The loop stops on the termination sentinel, when
/// `max_steps` actions have been executed, when the same non-navigation
/// action has been taken `repeat_limit` times from the same screen, or on a
/// backend error. A missing element gets one fresh capture and re-plan; a
/// second miss in a row ends the run.
pub fn run_test_case(
    test: &TestCase,
    device: &mut dyn DeviceSession,
    llm: &dyn LlmBackend,
    cfg: &AgentConfig,
    mut recorder: Option<&mut RecorderSink>,
) -> ExecutionTrace {
    let started_at = now_millis();
    let mut records: Vec<ActionRecord> = Vec::new();
    let verdict = drive(test, device, llm, cfg, &mut recorder, &mut records);
    ExecutionTrace {
        test: test.clone(),
        records,
        verdict,
        started_at,
        ended_at: now_millis(),
        goal_satisfied: None,
    }
}

fn drive(
    test: &TestCase,
    device: &mut dyn DeviceSession,
    llm: &dyn LlmBackend,
    cfg: &AgentConfig,
    recorder: &mut Option<&mut RecorderSink>,
    records: &mut Vec<ActionRecord>,
) -> Verdict {
    if let Err(e) = cfg.validate().and_then(|_| test.validate()) {
        return Verdict::DecisionFailure(e);
    }
    let mut screen = match capture(device) {
        Ok(s) => s,
        Err(v) => return v,
    };
    let mut executed = 0u32;
    let mut missed_element = false;
    loop {
        let step = records.len() as u32 + 1;
        let past_actions = records
            .iter()
            .map(|r| render_history_line(r.step, r))
            .collect();
        let prompt = build_prompt(&PromptContext {
            goal: test.description.clone(),
            past_actions,
            screen_text: screen.render(),
        });
        let decided = match decide(&prompt, &screen, llm, cfg, (&test.id, step), recorder) {
            Ok(d) => d,
            Err(v) => return v,
        };
        let keep = |s: String| cfg.record_for_distillation.then_some(s);
        let action = decided.action.action.clone();
        let decision = decided.action.decision;

        if action == Action::Terminate {
            records.push(ActionRecord {
                step,
                action,
                element_label: String::new(),
                screen_hash_before: screen.screen_hash.clone(),
                screen_hash_after: screen.screen_hash.clone(),
                decision,
                latency_ms: decided.llm_ms,
                prompt: keep(decided.prompt),
                raw_response: keep(decided.raw),
            });
            return Verdict::Completed;
        }
        if executed >= cfg.max_steps {
            return Verdict::StepLimitExceeded;
        }

        let id = action.element_id().map(i64::from).unwrap_or(decision.id);
        let element_label = screen
            .element(id)
            .map(|e| e.label.clone())
            .unwrap_or_default();
        let loc = match resolve_locator(&screen, id) {
            Ok(l) => l,
            Err(e) => return Verdict::DecisionFailure(e.to_string()),
        };
        let exec_start = Instant::now();
        match device.execute(&loc, &action) {
            Ok(()) => {}
            Err(DeviceError::ElementNotFound(m)) | Err(DeviceError::UnknownElement(m)) => {
                if missed_element {
                    return Verdict::DecisionFailure(format!(
                        "element not found after re-capture: {m}"
                    ));
                }
                log::info!("step {step}: element not found ({m}); re-capturing");
                missed_element = true;
                screen = match capture(device) {
                    Ok(s) => s,
                    Err(v) => return v,
                };
                continue;
            }
            Err(DeviceError::ActionRejected(m)) => {
                log::warn!("step {step}: device rejected {action}: {m}");
            }
            Err(e) => return Verdict::BackendFailure(format!("execute: {e}")),
        }
        missed_element = false;
        let after = match capture(device) {
            Ok(s) => s,
            Err(v) => return v,
        };
        let exec_ms = exec_start.elapsed().as_millis() as u64;

        let repeated = detect_repeat(records, &action, &screen.screen_hash);
        if repeated != decision.repeating_past_action_bool {
            log::warn!(
                "step {step}: model says repeating={} but history says {repeated}",
                decision.repeating_past_action_bool
            );
        }
        records.push(ActionRecord {
            step,
            action: action.clone(),
            element_label,
            screen_hash_before: screen.screen_hash.clone(),
            screen_hash_after: after.screen_hash.clone(),
            decision,
            latency_ms: decided.llm_ms + exec_ms,
            prompt: keep(decided.prompt),
            raw_response: keep(decided.raw),
        });
        executed += 1;
        if repeat_count(records, &action, &screen.screen_hash) >= cfg.repeat_limit as usize {
            return Verdict::RepeatLimitExceeded;
        }
        screen = after;
    }
}

/// Runs `test` against a fresh simulator session and checks its goal.
pub fn run_sim_test(
    test: &TestCase,
    spec: Arc<SimAppSpec>,
    llm: &dyn LlmBackend,
    cfg: &AgentConfig,
    recorder: Option<&mut RecorderSink>,
) -> ExecutionTrace {
    let mut session = SimSession::new(spec);
    let mut trace = run_test_case(test, &mut session, llm, cfg, recorder);
    trace.goal_satisfied = test.goal.as_ref().map(|g| check_goal(session.state(), g));
    if let Err(e) = session.close() {
        log::debug!("closing sim session: {e}");
    }
    trace
}
