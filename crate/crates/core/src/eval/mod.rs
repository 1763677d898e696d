//! Running suites and turning traces into numbers, reports and training data.

mod distill;
mod lint;
mod metrics;
mod report;
mod suite;

use std::collections::BTreeMap;
use std::path::Path;

pub use distill::{export_distill, write_distill, DistillError, DistillRecord, FilterConfig};
pub use lint::{lint_description, lint_text, LintFinding, LintKind};
pub use metrics::{
    compute_metrics, HistogramBucket, Outcome, ReportMeta, SuiteReport, TestRow, HISTOGRAM_BUCKETS,
};
pub use report::{format_percent, format_seconds, render_histogram, render_report, render_table, table_cells};
pub use suite::{run_suite, BackendKind, LlmConfig, RunOptions, SuiteError, SuiteRun, SuiteSpec};

/// Human verdicts keyed by trace id.
pub type Verdicts = BTreeMap<String, bool>;

pub fn load_verdicts(path: &Path) -> Result<Verdicts, String> {
    if !path.exists() {
        return Ok(Verdicts::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn save_verdicts(path: &Path, verdicts: &Verdicts) -> Result<(), String> {
    let text = serde_json::to_string_pretty(verdicts).expect("verdict map serializes");
    std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}
