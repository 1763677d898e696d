use std::fmt::Write;

use super::metrics::{Outcome, SuiteReport};

const COLUMNS: [&str; 5] = [
    "Technique",
    "Model",
    "Test Execution Success Rate",
    "Error Recovery Rate",
    "Execution Time per Step",
];

/// `0.7` → `"70%"`, `None` → `"N/A"`.
pub fn format_percent(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{}%", (v * 100.0).round() as i64),
        None => "N/A".into(),
    }
}

/// Milliseconds as seconds with one decimal: `11800.0` → `"11.8s"`.
pub fn format_seconds(ms: Option<f64>) -> String {
    match ms {
        Some(v) => format!("{:.1}s", v / 1000.0),
        None => "N/A".into(),
    }
}

/// The five cells of the summary row, in column order.
pub fn table_cells(r: &SuiteReport) -> [String; 5] {
    [
        r.meta.technique.clone(),
        r.meta.model.clone(),
        format_percent(r.success_rate),
        format_percent(r.error_recovery_rate),
        format_seconds(r.mean_time_per_step_ms),
    ]
}

/// Pipe-separated header and summary row, columns padded to equal width.
pub fn render_table(r: &SuiteReport) -> String {
    let cells = table_cells(r);
    let widths: Vec<usize> = COLUMNS
        .iter()
        .zip(&cells)
        .map(|(h, c)| h.chars().count().max(c.chars().count()))
        .collect();
    let row = |items: &[&str]| {
        items
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let rule = widths
        .iter()
        .map(|w| "-".repeat(*w))
        .collect::<Vec<_>>()
        .join("-|-");
    let cell_refs: Vec<&str> = cells.iter().map(String::as_str).collect();
    format!("{}\n{rule}\n{}\n", row(&COLUMNS), row(&cell_refs))
}

/// Text bars: one `#` per test, `+` marks the successful ones.
pub fn render_histogram(r: &SuiteReport) -> String {
    let mut out = String::from("Steps  | Tests\n");
    for b in &r.length_histogram {
        let bar = format!("{}{}", "+".repeat(b.succeeded), "#".repeat(b.total - b.succeeded));
        let _ = writeln!(out, "{:<6} | {bar} {}/{}", b.bucket, b.succeeded, b.total);
    }
    out
}

/// Table, histogram and one line per test.
pub fn render_report(r: &SuiteReport) -> String {
    let mut out = render_table(r);
    out.push('\n');
    out.push_str(&render_histogram(r));
    out.push('\n');
    for row in &r.per_test {
        let outcome = match row.outcome {
            Outcome::Success => "ok",
            Outcome::Failure => "FAIL",
            Outcome::Pending => "pending",
        };
        let _ = writeln!(
            out,
            "{:<8} {} steps={} latency/step={} verdict={}",
            outcome,
            row.test_id,
            row.steps,
            format_seconds(row.mean_step_latency_ms),
            row.verdict
        );
    }
    if r.pending > 0 {
        let _ = writeln!(
            out,
            "\n{} completed run(s) await a human verdict and are excluded from the success rate.",
            r.pending
        );
    }
    out
}
