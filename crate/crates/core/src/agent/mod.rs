//! The decide/execute loop and what it produces.

mod recovery;
mod run;
mod trace_file;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::sim::GoalPredicate;
use crate::prompt::Decision;
use crate::Action;

pub use recovery::{classify_recovery_events, RecoveryMode, RecoveryReport};
pub use run::{detect_repeat, run_sim_test, run_test_case};
pub use trace_file::{read_trace, trace_file_name, write_trace, TraceError};

/// A natural-language test: what to achieve, not how.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub description: String,
    /// Package name on a device, or a simulator app-spec path.
    pub app_binding: String,
    /// Expected final state; only checkable in the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalPredicate>,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl TestCase {
    pub fn new(id: impl Into<String>, description: impl Into<String>, app: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            app_binding: app.into(),
            goal: None,
            tags: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("test id is empty".into());
        }
        if self.description.trim().is_empty() {
            return Err(format!("test `{}` has an empty description", self.id));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let t: TestCase =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        t.validate()?;
        Ok(t)
    }
}

/// One executed step, or the final terminate decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    /// 1-based, consecutive within a trace.
    pub step: u32,
    pub action: Action,
    pub element_label: String,
    pub screen_hash_before: String,
    pub screen_hash_after: String,
    pub decision: Decision,
    /// LLM time plus execution time.
    pub latency_ms: u64,
    /// Prompt that produced `decision`; kept only when recording for
    /// distillation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

impl ActionRecord {
    /// Record with placeholder hashes and a synthesized decision.
    pub fn for_test(step: u32, action: Action, label: &str) -> Self {
        let decision = match &action {
            Action::Terminate => Decision::new_termination(),
            Action::InputText { id, text } => Decision::new_action(*id as i64, Some(text)),
            Action::Tap { id } => Decision::new_action(*id as i64, None),
            _ => Decision::new_action(0, None),
        };
        Self {
            step,
            action,
            element_label: label.to_string(),
            screen_hash_before: String::new(),
            screen_hash_after: String::new(),
            decision,
            latency_ms: 0,
            prompt: None,
            raw_response: None,
        }
    }

    pub fn is_terminate(&self) -> bool {
        self.action == Action::Terminate
    }
}

/// Machine outcome of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Completed,
    StepLimitExceeded,
    RepeatLimitExceeded,
    DecisionFailure(String),
    BackendFailure(String),
}

impl Verdict {
    pub fn is_completed(&self) -> bool {
        *self == Verdict::Completed
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Completed => "Completed",
            Verdict::StepLimitExceeded => "StepLimitExceeded",
            Verdict::RepeatLimitExceeded => "RepeatLimitExceeded",
            Verdict::DecisionFailure(_) => "DecisionFailure",
            Verdict::BackendFailure(_) => "BackendFailure",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::DecisionFailure(r) | Verdict::BackendFailure(r) => {
                write!(f, "{}: {r}", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub test: TestCase,
    /// Executed steps in order, then the terminate record if the run
    /// completed.
    pub records: Vec<ActionRecord>,
    pub verdict: Verdict,
    pub started_at: u64,
    pub ended_at: u64,
    /// Simulator goal check at the end of the run, when a goal was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_satisfied: Option<bool>,
}

impl ExecutionTrace {
    pub fn trace_id(&self) -> &str {
        &self.test.id
    }

    pub fn executed(&self) -> impl Iterator<Item = &ActionRecord> {
        self.records.iter().filter(|r| !r.is_terminate())
    }

    /// Number of executed (non-terminate) actions.
    pub fn executed_steps(&self) -> usize {
        self.executed().count()
    }

    pub fn executed_latency_ms(&self) -> u64 {
        self.executed().map(|r| r.latency_ms).sum()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.records.iter().map(|r| r.action.clone()).collect()
    }
}

/// Loop limits and recording switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_steps: u32,
    pub repeat_limit: u32,
    /// Extra attempts after an unusable answer.
    pub parse_retry_limit: u32,
    pub record_for_distillation: bool,
    pub model: String,
    pub temperature: f32,
    pub llm_timeout_secs: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_steps: 25,
            repeat_limit: 3,
            parse_retry_limit: 1,
            record_for_distillation: false,
            model: "gpt-4o".into(),
            temperature: 0.0,
            llm_timeout_secs: 120,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps == 0 {
            return Err("max_steps must be at least 1".into());
        }
        if self.repeat_limit == 0 {
            return Err("repeat_limit must be at least 1".into());
        }
        Ok(())
    }
}
