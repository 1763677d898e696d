use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{classify_recovery_events, ExecutionTrace};
use crate::device::sim::OracleLabels;
use crate::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Traces with more executed steps than `oracle length × factor` are
    /// dropped whole.
    pub inefficiency_factor: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            inefficiency_factor: 2.0,
        }
    }
}

/// One prompt/answer training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub prompt: String,
    /// Canonical decision JSON.
    pub completion: String,
    pub app: String,
    pub step: u32,
    pub trace_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DistillError {
    #[error("trace `{trace_id}` step {step} has no recorded prompt/response")]
    MissingRecording { trace_id: String, step: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Indices to drop: each erroneous step plus the excursion up to the Back
/// that returns to its starting screen.
fn dropped_steps(trace: &ExecutionTrace, erroneous: &[usize]) -> BTreeSet<usize> {
    let records = &trace.records;
    let mut drop = BTreeSet::new();
    for &i in erroneous {
        let origin = &records[i].screen_hash_before;
        let back = (i + 1..records.len())
            .find(|&j| records[j].action == Action::Back && records[j].screen_hash_after == *origin);
        match back {
            Some(j) => drop.extend(i..=j),
            None => {
                drop.insert(i);
            }
        }
    }
    drop
}

/// Builds training records from completed traces.
///
/// Erroneous steps come from oracle labels when the trace has them and from
/// the backtracking heuristic otherwise.
pub fn export_distill(
    traces: &[ExecutionTrace],
    oracles: &HashMap<String, OracleLabels>,
    filters: &FilterConfig,
) -> Result<Vec<DistillRecord>, DistillError> {
    let mut out = Vec::new();
    for trace in traces {
        if !trace.verdict.is_completed() {
            continue;
        }
        let labels = oracles.get(trace.trace_id());
        if let Some(l) = labels {
            let limit = l.shortest_len as f64 * filters.inefficiency_factor;
            if trace.executed_steps() as f64 > limit {
                log::info!(
                    "dropping trace `{}`: {} steps against oracle {}",
                    trace.trace_id(),
                    trace.executed_steps(),
                    l.shortest_len
                );
                continue;
            }
        }
        let report = classify_recovery_events(trace, labels);
        let drop = dropped_steps(trace, &report.erroneous);
        for (i, r) in trace.records.iter().enumerate() {
            if drop.contains(&i) {
                continue;
            }
            let (Some(prompt), Some(_)) = (&r.prompt, &r.raw_response) else {
                return Err(DistillError::MissingRecording {
                    trace_id: trace.trace_id().to_string(),
                    step: r.step,
                });
            };
            out.push(DistillRecord {
                prompt: prompt.clone(),
                completion: r.decision.to_canonical_json(),
                app: trace.test.app_binding.clone(),
                step: r.step,
                trace_id: trace.trace_id().to_string(),
            });
        }
    }
    Ok(out)
}

pub fn write_distill(path: &Path, records: &[DistillRecord]) -> Result<(), DistillError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{ActionRecord, TestCase, Verdict};

    fn rec(step: u32, action: Action, before: &str, after: &str) -> ActionRecord {
        let mut r = ActionRecord::for_test(step, action, "");
        r.screen_hash_before = before.into();
        r.screen_hash_after = after.into();
        r.prompt = Some(format!("prompt {step}"));
        r.raw_response = Some(r.decision.to_canonical_json());
        r
    }

    fn trace(records: Vec<ActionRecord>, verdict: Verdict) -> ExecutionTrace {
        ExecutionTrace {
            test: TestCase::new("t", "d", "app"),
            records,
            verdict,
            started_at: 0,
            ended_at: 0,
            goal_satisfied: None,
        }
    }

    #[test]
    fn unrecorded_trace_is_an_error() {
        let mut r = rec(1, Action::Terminate, "a", "a");
        r.prompt = None;
        let err = export_distill(&[trace(vec![r], Verdict::Completed)], &HashMap::new(), &FilterConfig::default());
        assert!(matches!(err, Err(DistillError::MissingRecording { step: 1, .. })));
    }

    #[test]
    fn failed_traces_are_skipped() {
        let t = trace(vec![rec(1, Action::Tap { id: 0 }, "a", "b")], Verdict::StepLimitExceeded);
        assert!(export_distill(&[t], &HashMap::new(), &FilterConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn erroneous_without_return_drops_only_itself() {
        let t = trace(
            vec![
                rec(1, Action::Tap { id: 0 }, "a", "b"),
                rec(2, Action::Tap { id: 1 }, "b", "c"),
                rec(3, Action::Terminate, "c", "c"),
            ],
            Verdict::Completed,
        );
        let mut oracles = HashMap::new();
        oracles.insert(
            "t".to_string(),
            OracleLabels {
                erroneous: vec![true, false, false],
                shortest_len: 2,
            },
        );
        let got = export_distill(&[t], &oracles, &FilterConfig::default()).unwrap();
        assert_eq!(got.iter().map(|r| r.step).collect::<Vec<_>>(), [2, 3]);
    }
}
