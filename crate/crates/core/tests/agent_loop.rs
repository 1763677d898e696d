mod common;

use nlgui_core::agent::{run_sim_test, run_test_case, AgentConfig, ExecutionTrace, Verdict};
use nlgui_core::device::sim::SimSession;
use nlgui_core::device::{DeviceError, DeviceSession};
use nlgui_core::llm::{read_exchanges, RecorderSink, ReplayBackend, ReplayScript};
use nlgui_core::prompt::Decision;
use nlgui_core::screen::{Locator, RawScreen};
use nlgui_core::Action;

use common::*;

fn tap(id: i64) -> String {
    Decision::new_action(id, None).to_canonical_json()
}

fn done() -> String {
    Decision::new_termination().to_canonical_json()
}

fn replay(lines: Vec<String>) -> ReplayBackend {
    ReplayBackend::new(ReplayScript::sequential(lines)).unwrap()
}

fn fixture(name: &str) -> SimFixture {
    sim_fixtures().into_iter().find(|f| f.app == name).unwrap()
}

fn run(name: &str, lines: Vec<String>, cfg: &AgentConfig) -> ExecutionTrace {
    run_sim_test(&fixture(name).test_case(), app(name), &replay(lines), cfg, None)
}

#[test]
fn immediate_terminate_completes_with_zero_steps() {
    let t = run("about", vec![done()], &AgentConfig::default());
    assert_eq!(t.verdict, Verdict::Completed);
    assert_eq!(t.executed_steps(), 0);
    assert_eq!(t.records.len(), 1);
    assert_eq!(t.goal_satisfied, Some(true));
}

#[test]
fn same_tap_on_unchanged_screen_hits_repeat_limit() {
    // Gallery, then "Photo 1" (no transition) three times.
    let t = run("decoy", vec![tap(0), tap(0), tap(0), tap(0), done()], &AgentConfig::default());
    assert_eq!(t.verdict, Verdict::RepeatLimitExceeded);
    assert_eq!(t.executed_steps(), 4);
    let photo = &t.records[1];
    assert!(t.records[1..].iter().all(|r| r.screen_hash_before == photo.screen_hash_before));
}

#[test]
fn back_is_exempt_from_the_repeat_guard() {
    // Contacts then Back, four times over; Back lands on the same screen each time.
    let mut lines = Vec::new();
    for _ in 0..4 {
        lines.extend([tap(1), tap(1)]);
    }
    let cfg = AgentConfig {
        repeat_limit: 5,
        ..AgentConfig::default()
    };
    let t = run("decoy", lines.clone(), &cfg);
    assert_eq!(t.executed_steps(), 8);
    assert!(matches!(t.verdict, Verdict::BackendFailure(_)), "script runs out: {}", t.verdict);
    let t = run("decoy", lines, &AgentConfig::default());
    assert_eq!(t.verdict, Verdict::RepeatLimitExceeded);
    assert_eq!(t.executed_steps(), 5);
}

#[test]
fn terminate_at_the_step_limit_still_completes() {
    let cfg = AgentConfig {
        max_steps: 3,
        ..AgentConfig::default()
    };
    let t = run("contacts", vec![tap(0), tap(0), tap(0), done()], &cfg);
    assert_eq!(t.verdict, Verdict::Completed);
    let t = run("contacts", vec![tap(0), tap(0), tap(0), tap(1), done()], &cfg);
    assert_eq!(t.verdict, Verdict::StepLimitExceeded);
    assert_eq!(t.executed_steps(), 3);
}

#[test]
fn garbage_answer_is_retried_with_the_error() {
    let cfg = AgentConfig {
        record_for_distillation: true,
        ..AgentConfig::default()
    };
    let t = run("about", vec!["no idea".into(), done()], &cfg);
    assert_eq!(t.verdict, Verdict::Completed);
    let prompt = t.records[0].prompt.as_deref().unwrap();
    assert!(prompt.len() > 100 && prompt.contains("no JSON"), "{prompt}");
}

#[test]
fn two_unusable_answers_are_a_decision_failure() {
    let t = run("about", vec!["no idea".into(), tap(42), done()], &AgentConfig::default());
    assert!(matches!(t.verdict, Verdict::DecisionFailure(_)), "{}", t.verdict);
    assert!(t.records.is_empty());
}

#[test]
fn exhausted_script_is_a_backend_failure() {
    let t = run("contacts", vec![tap(0)], &AgentConfig::default());
    assert!(matches!(t.verdict, Verdict::BackendFailure(_)));
    assert_eq!(t.executed_steps(), 1);
}

#[test]
fn rejected_action_is_recorded_and_the_run_goes_on() {
    // Display, disabled Font size, Dark theme.
    let t = run("settings", vec![tap(1), tap(1), tap(0), done()], &AgentConfig::default());
    assert_eq!(t.verdict, Verdict::Completed);
    assert_eq!(t.executed_steps(), 3);
    assert_eq!(t.records[1].element_label, "Font size");
    assert_eq!(t.records[1].screen_hash_before, t.records[1].screen_hash_after);
    assert_eq!(t.goal_satisfied, Some(true));
}

/// Sim session whose first `misses` element actions report a missing element.
struct Flaky {
    inner: SimSession,
    misses: usize,
}

impl DeviceSession for Flaky {
    fn capture_source(&mut self) -> Result<RawScreen, DeviceError> {
        self.inner.capture_source()
    }

    fn execute(&mut self, loc: &Locator, act: &Action) -> Result<(), DeviceError> {
        if self.misses > 0 && act.element_id().is_some() {
            self.misses -= 1;
            return Err(DeviceError::ElementNotFound("stale".into()));
        }
        self.inner.execute(loc, act)
    }

    fn close(&mut self) -> Result<(), DeviceError> {
        self.inner.close()
    }

    fn backend_tag(&self) -> &str {
        "flaky"
    }
}

fn flaky_run(misses: usize, lines: Vec<String>) -> ExecutionTrace {
    let mut s = Flaky {
        inner: SimSession::new(app("contacts")),
        misses,
    };
    run_test_case(&fixture("contacts").test_case(), &mut s, &replay(lines), &AgentConfig::default(), None)
}

#[test]
fn one_missing_element_is_replanned() {
    let t = flaky_run(1, vec![tap(0), tap(0), tap(0), tap(0), done()]);
    assert_eq!(t.verdict, Verdict::Completed);
    assert_eq!(t.executed_steps(), 3);
}

#[test]
fn second_consecutive_miss_ends_the_run() {
    let t = flaky_run(2, vec![tap(0), tap(0), done()]);
    assert!(matches!(t.verdict, Verdict::DecisionFailure(_)), "{}", t.verdict);
    assert!(t.records.is_empty());
}

struct Dead;

impl DeviceSession for Dead {
    fn capture_source(&mut self) -> Result<RawScreen, DeviceError> {
        Err(DeviceError::TransportError("connection refused".into()))
    }

    fn execute(&mut self, _: &Locator, _: &Action) -> Result<(), DeviceError> {
        unreachable!()
    }

    fn close(&mut self) -> Result<(), DeviceError> {
        Ok(())
    }

    fn backend_tag(&self) -> &str {
        "dead"
    }
}

#[test]
fn unreachable_device_is_a_backend_failure() {
    let t = run_test_case(&fixture("about").test_case(), &mut Dead, &replay(vec![done()]), &AgentConfig::default(), None);
    assert!(matches!(t.verdict, Verdict::BackendFailure(_)));
}

#[test]
fn recorder_captures_every_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex.jsonl");
    let mut sink = RecorderSink::append_to(&path).unwrap();
    let f = fixture("contacts");
    let lines = vec![tap(0), "oops".into(), tap(0), tap(0), done()];
    let t = run_sim_test(&f.test_case(), app("contacts"), &replay(lines), &AgentConfig::default(), Some(&mut sink));
    assert_eq!(t.verdict, Verdict::Completed);
    let ex = read_exchanges(&path).unwrap();
    let keys: Vec<(u32, u32)> = ex.iter().map(|e| (e.step, e.attempt)).collect();
    assert_eq!(keys, [(1, 1), (2, 1), (2, 2), (3, 1), (4, 1)]);
    assert!(ex.iter().all(|e| e.trace_id == "contacts"));
}

#[test]
fn history_in_later_prompts_lists_earlier_steps() {
    let cfg = AgentConfig {
        record_for_distillation: true,
        ..AgentConfig::default()
    };
    let t = run_sim_test(
        &fixture("contacts").test_case(),
        app("contacts"),
        &replay(vec![tap(0), tap(0), tap(0), done()]),
        &cfg,
        None,
    );
    let first = t.records[0].prompt.as_deref().unwrap();
    let last = t.records[3].prompt.as_deref().unwrap();
    assert!(first.ends_with("Past Actions:\nNone\n"));
    assert!(last.contains("Contact X") && !last.ends_with("None\n"));
}
