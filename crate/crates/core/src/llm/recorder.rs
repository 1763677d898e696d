use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LlmError, LlmRequest, LlmResponse};

/// Where an exchange happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMeta {
    pub trace_id: String,
    pub step: u32,
    /// 1 for the first request of a step, 2 for its retry.
    pub attempt: u32,
}

/// One line of an exchange log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedExchange {
    pub trace_id: String,
    pub step: u32,
    pub attempt: u32,
    pub model: String,
    pub backend: String,
    pub latency_ms: u64,
    pub prompt: String,
    pub response: String,
}

/// Append-only JSON-lines log of LLM exchanges, owned by one session.
pub struct RecorderSink {
    writer: Box<dyn Write + Send>,
    written: usize,
}

impl std::fmt::Debug for RecorderSink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RecorderSink")
            .field("written", &self.written)
            .finish()
    }
}

impl RecorderSink {
    pub fn new(writer: impl Write + Send + 'static) -> Self {
        Self {
            writer: Box::new(writer),
            written: 0,
        }
    }

    /// Opens `path` for appending, creating it if needed.
    pub fn append_to(path: &Path) -> Result<Self, LlmError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::new(file))
    }

    pub fn written(&self) -> usize {
        self.written
    }
}

/// Appends one exchange to the sink and flushes it.
pub fn record_exchange(
    sink: &mut RecorderSink,
    req: &LlmRequest,
    resp: &LlmResponse,
    meta: &StepMeta,
) -> Result<(), LlmError> {
    let rec = RecordedExchange {
        trace_id: meta.trace_id.clone(),
        step: meta.step,
        attempt: meta.attempt,
        model: req.model_name.clone(),
        backend: resp.backend_tag.clone(),
        latency_ms: resp.latency_ms,
        prompt: req.prompt.clone(),
        response: resp.raw_text.clone(),
    };
    let mut line = serde_json::to_vec(&rec).map_err(std::io::Error::other)?;
    line.push(b'\n');
    sink.writer.write_all(&line)?;
    sink.writer.flush()?;
    sink.written += 1;
    Ok(())
}

pub fn read_exchanges(path: &Path) -> Result<Vec<RecordedExchange>, LlmError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}
