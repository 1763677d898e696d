//! LLM backends.
//!
//! Everything goes through [`LlmBackend::complete`]. [`HttpBackend`] talks to a
//! chat-completion endpoint, [`ReplayBackend`] answers from a script for
//! hermetic runs, and [`RecorderSink`] keeps an append-only log of exchanges.

mod http;
mod recorder;
mod replay;

use std::time::Duration;

use sha2::{Digest, Sha256};

pub use http::HttpBackend;
pub use recorder::{read_exchanges, record_exchange, RecordedExchange, RecorderSink, StepMeta};
pub use replay::{ReplayBackend, ReplayEntry, ReplayMatch, ReplayScript};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("LLM request timed out")]
    Timeout,
    #[error("LLM transport error: {0}")]
    TransportError(String),
    #[error("replay script has no entry for call {call}")]
    ScriptExhausted { call: u32 },
    #[error("invalid LLM request: {0}")]
    InvalidRequest(String),
    #[error("recorder sink write failed: {0}")]
    SinkWriteError(#[from] std::io::Error),
    #[error("invalid replay script: {0}")]
    BadScript(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub prompt: String,
    pub model_name: String,
    /// 0..=2
    pub temperature: f32,
    pub max_output_tokens: u32,
    pub timeout: Duration,
}

impl LlmRequest {
    pub fn new(prompt: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_output_tokens: 2048,
            timeout: Duration::from_secs(120),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt".into()));
        }
        if self.timeout.is_zero() {
            return Err(LlmError::InvalidRequest("timeout must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside 0..=2",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmResponse {
    pub raw_text: String,
    pub latency_ms: u64,
    pub backend_tag: String,
}

/// A model endpoint. Implementations must be usable from several sessions at
/// once; per-session state (like a replay cursor) lives in the instance.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError>;

    fn tag(&self) -> &str;
}

/// Hex SHA-256 of a prompt, used to key replay entries.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}
