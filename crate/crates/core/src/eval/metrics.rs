use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::agent::{classify_recovery_events, ExecutionTrace, Verdict};
use crate::device::sim::OracleLabels;

/// Step-count buckets of the length histogram, with inclusive bounds.
pub const HISTOGRAM_BUCKETS: [(&str, usize, usize); 7] = [
    ("0", 0, 0),
    ("1-2", 1, 2),
    ("3-5", 3, 5),
    ("6-10", 6, 10),
    ("11-15", 11, 15),
    ("16-20", 16, 20),
    ("21+", 21, usize::MAX),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    /// Completed on a device but not yet judged by a person.
    Pending,
}

impl Outcome {
    /// A human verdict wins; then the simulator goal check; a completed run
    /// with neither is pending.
    pub fn of(trace: &ExecutionTrace, human: Option<bool>) -> Self {
        let ok = |b| if b { Outcome::Success } else { Outcome::Failure };
        if let Some(h) = human {
            return ok(h);
        }
        match (trace.verdict.is_completed(), trace.goal_satisfied) {
            (true, Some(g)) => ok(g),
            (true, None) => Outcome::Pending,
            (false, _) => Outcome::Failure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub test_id: String,
    pub description: String,
    pub verdict: Verdict,
    pub human_verdict: Option<bool>,
    pub goal_satisfied: Option<bool>,
    pub outcome: Outcome,
    pub steps: usize,
    pub mean_step_latency_ms: Option<f64>,
    pub erroneous_steps: usize,
    pub recovered_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub bucket: String,
    pub total: usize,
    pub succeeded: usize,
}

/// Labels for the report's first two columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub technique: String,
    pub model: String,
}

impl Default for ReportMeta {
    fn default() -> Self {
        Self {
            technique: "nlgui".into(),
            model: "unknown".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub meta: ReportMeta,
    pub per_test: Vec<TestRow>,
    pub successes: usize,
    pub failures: usize,
    pub pending: usize,
    /// successes / (successes + failures); pending runs are excluded.
    pub success_rate: Option<f64>,
    pub erroneous_steps: usize,
    pub recovered_steps: usize,
    pub error_recovery_rate: Option<f64>,
    pub total_steps: usize,
    pub total_latency_ms: u64,
    pub mean_time_per_step_ms: Option<f64>,
    pub length_histogram: Vec<HistogramBucket>,
}

/// Scores a set of traces.
///
/// Recovery uses oracle labels where `oracles` has an entry for the trace id
/// and the heuristic otherwise; counts are pooled over all steps. Step
/// counts and latencies cover executed actions only.
pub fn compute_metrics(
    traces: &[ExecutionTrace],
    verdicts: &BTreeMap<String, bool>,
    oracles: &HashMap<String, OracleLabels>,
    meta: ReportMeta,
) -> SuiteReport {
    let mut per_test: Vec<TestRow> = traces
        .iter()
        .map(|t| {
            let human = verdicts.get(t.trace_id()).copied();
            let recovery = classify_recovery_events(t, oracles.get(t.trace_id()));
            let steps = t.executed_steps();
            TestRow {
                test_id: t.trace_id().to_string(),
                description: t.test.description.clone(),
                verdict: t.verdict.clone(),
                human_verdict: human,
                goal_satisfied: t.goal_satisfied,
                outcome: Outcome::of(t, human),
                steps,
                mean_step_latency_ms: (steps > 0)
                    .then(|| t.executed_latency_ms() as f64 / steps as f64),
                erroneous_steps: recovery.erroneous.len(),
                recovered_steps: recovery.recovered.len(),
            }
        })
        .collect();
    per_test.sort_by(|a, b| a.test_id.cmp(&b.test_id));

    let count = |o| per_test.iter().filter(|r| r.outcome == o).count();
    let (successes, failures, pending) = (
        count(Outcome::Success),
        count(Outcome::Failure),
        count(Outcome::Pending),
    );
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let erroneous_steps = per_test.iter().map(|r| r.erroneous_steps).sum();
    let recovered_steps = per_test.iter().map(|r| r.recovered_steps).sum();
    let total_steps = per_test.iter().map(|r| r.steps).sum();
    let total_latency_ms: u64 = traces.iter().map(|t| t.executed_latency_ms()).sum();

    let length_histogram = HISTOGRAM_BUCKETS
        .iter()
        .map(|&(label, lo, hi)| {
            let rows = per_test.iter().filter(|r| (lo..=hi).contains(&r.steps));
            let (total, succeeded) = rows.fold((0, 0), |(t, s), r| {
                (t + 1, s + usize::from(r.outcome == Outcome::Success))
            });
            HistogramBucket {
                bucket: label.to_string(),
                total,
                succeeded,
            }
        })
        .collect();

    SuiteReport {
        meta,
        successes,
        failures,
        pending,
        success_rate: ratio(successes, successes + failures),
        erroneous_steps,
        recovered_steps,
        error_recovery_rate: ratio(recovered_steps, erroneous_steps),
        total_steps,
        total_latency_ms,
        mean_time_per_step_ms: (total_steps > 0)
            .then(|| total_latency_ms as f64 / total_steps as f64),
        length_histogram,
        per_test,
    }
}
