use std::io;
use std::time::Instant;

use serde_json::{json, Value};

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse};

/// OpenAI-style chat-completion client. The whole prompt is sent as a single
/// user message and the first choice's content is returned verbatim.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.filter(|k| !k.is_empty()),
            agent: ureq::AgentBuilder::new().build(),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn request_body(req: &LlmRequest) -> Value {
        json!({
            "model": req.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        })
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        req.validate()?;
        let started = Instant::now();
        let mut call = self
            .agent
            .post(&self.endpoint)
            .timeout(req.timeout)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = call.send_json(Self::request_body(req)).map_err(map_error)?;
        let body: Value = resp
            .into_json()
            .map_err(|e| io_error(e, "reading response body"))?;
        let content = body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| {
                LlmError::TransportError("response has no choices[0].message.content".into())
            })?;
        Ok(LlmResponse {
            raw_text: content.to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
            backend_tag: self.tag().to_string(),
        })
    }

    fn tag(&self) -> &str {
        "http"
    }
}

fn io_error(e: io::Error, context: &str) -> LlmError {
    if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
        LlmError::Timeout
    } else {
        LlmError::TransportError(format!("{context}: {e}"))
    }
}

fn map_error(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            LlmError::TransportError(format!("HTTP {code}: {body}"))
        }
        ureq::Error::Transport(t) => {
            let timed_out = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<io::Error>())
                .is_some_and(|io| {
                    matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock)
                });
            if timed_out {
                LlmError::Timeout
            } else {
                LlmError::TransportError(t.to_string())
            }
        }
    }
}
