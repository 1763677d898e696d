use serde::{Deserialize, Serialize};

use super::{ActionRecord, ExecutionTrace};
use crate::device::sim::OracleLabels;
use crate::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    Oracle,
    Heuristic,
}

/// Erroneous and recovered steps of one trace, as record indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub mode: RecoveryMode,
    pub erroneous: Vec<usize>,
    pub recovered: Vec<usize>,
}

impl RecoveryReport {
    /// `None` when nothing went wrong.
    pub fn rate(&self) -> Option<f64> {
        (!self.erroneous.is_empty())
            .then(|| self.recovered.len() as f64 / self.erroneous.len() as f64)
    }
}

/// True iff some later Back lands on the screen record `i` started from and
/// the action after that Back differs from record `i`'s.
pub(crate) fn backtracked_and_differed(records: &[ActionRecord], i: usize) -> bool {
    let origin = &records[i].screen_hash_before;
    (i + 1..records.len()).any(|j| {
        records[j].action == Action::Back
            && records[j].screen_hash_after == *origin
            && records
                .get(j + 1)
                .is_some_and(|next| next.action != records[i].action)
    })
}

/// Finds erroneous steps and which of them were recovered from.
///
/// With oracle labels, a step is erroneous when the labels say so and
/// recovered when it was later backtracked and a different action followed.
/// Without labels, the backtrack-and-differ pattern itself marks the error,
/// and it counts as recovered only if the run completed.
pub fn classify_recovery_events(
    trace: &ExecutionTrace,
    oracle: Option<&OracleLabels>,
) -> RecoveryReport {
    let records = &trace.records;
    match oracle {
        Some(labels) => {
            let erroneous: Vec<usize> = (0..records.len())
                .filter(|&i| labels.erroneous.get(i).copied().unwrap_or(false))
                .collect();
            let recovered = erroneous
                .iter()
                .copied()
                .filter(|&i| backtracked_and_differed(records, i))
                .collect();
            RecoveryReport {
                mode: RecoveryMode::Oracle,
                erroneous,
                recovered,
            }
        }
        None => {
            let erroneous: Vec<usize> = (0..records.len())
                .filter(|&i| {
                    !records[i].action.is_navigation()
                        && !records[i].is_terminate()
                        && backtracked_and_differed(records, i)
                })
                .collect();
            let recovered = if trace.verdict.is_completed() {
                erroneous.clone()
            } else {
                Vec::new()
            };
            RecoveryReport {
                mode: RecoveryMode::Heuristic,
                erroneous,
                recovered,
            }
        }
    }
}
