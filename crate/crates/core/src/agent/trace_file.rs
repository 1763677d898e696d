//! Trace files: a header line, one line per record, a footer line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionRecord, ExecutionTrace, TestCase, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // one line at a time, never stored
enum Line {
    Header {
        trace_id: String,
        test: TestCase,
        started_at: u64,
    },
    Step(ActionRecord),
    Footer {
        verdict: Verdict,
        ended_at: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal_satisfied: Option<bool>,
    },
}

/// `trace-<id>.jsonl`
pub fn trace_file_name(trace_id: &str) -> String {
    let safe: String = trace_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("trace-{safe}.jsonl")
}

pub fn write_trace(path: &Path, trace: &ExecutionTrace) -> Result<(), TraceError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut put = |line: &Line| -> Result<(), TraceError> {
        serde_json::to_writer(&mut out, line).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    put(&Line::Header {
        trace_id: trace.trace_id().to_string(),
        test: trace.test.clone(),
        started_at: trace.started_at,
    })?;
    for r in &trace.records {
        put(&Line::Step(r.clone()))?;
    }
    put(&Line::Footer {
        verdict: trace.verdict.clone(),
        ended_at: trace.ended_at,
        goal_satisfied: trace.goal_satisfied,
    })?;
    out.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<ExecutionTrace, TraceError> {
    let file = std::fs::File::open(path)?;
    let mut header = None;
    let mut footer = None;
    let mut records = Vec::new();
    let mut last = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        last = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| TraceError::Malformed { line: n + 1, msg };
        if footer.is_some() {
            return Err(bad("content after footer".into()));
        }
        match serde_json::from_str::<Line>(&line).map_err(|e| bad(e.to_string()))? {
            Line::Header { test, started_at, .. } if header.is_none() => {
                header = Some((test, started_at))
            }
            Line::Header { .. } => return Err(bad("second header".into())),
            Line::Step(_) if header.is_none() => return Err(bad("step before header".into())),
            Line::Step(r) => {
                if r.step as usize != records.len() + 1 {
                    return Err(bad(format!("expected step {}, found {}", records.len() + 1, r.step)));
                }
                records.push(r)
            }
            Line::Footer {
                verdict,
                ended_at,
                goal_satisfied,
            } => footer = Some((verdict, ended_at, goal_satisfied)),
        }
    }
    let (test, started_at) = header.ok_or(TraceError::Malformed {
        line: last,
        msg: "missing header".into(),
    })?;
    let (verdict, ended_at, goal_satisfied) = footer.ok_or(TraceError::Malformed {
        line: last,
        msg: "missing footer".into(),
    })?;
    Ok(ExecutionTrace {
        test,
        records,
        verdict,
        started_at,
        ended_at,
        goal_satisfied,
    })
}
