use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{prompt_digest, LlmBackend, LlmError, LlmRequest, LlmResponse};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ReplayMatch {
    /// 1-based call number.
    Step(u32),
    /// [`prompt_digest`] of the exact prompt.
    Digest(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayEntry {
    pub matcher: ReplayMatch,
    pub response: String,
}

/// One line of a replay file. `response` is the raw text; `decision` is an
/// object serialized as the response, for hand-written scripts.
#[derive(Debug, Serialize, Deserialize)]
struct ReplayLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decision: Option<Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayScript {
    pub entries: Vec<ReplayEntry>,
}

impl ReplayScript {
    /// Script answering call `k` with `responses[k - 1]`.
    pub fn sequential<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            entries: responses
                .into_iter()
                .enumerate()
                .map(|(i, r)| ReplayEntry {
                    matcher: ReplayMatch::Step(i as u32 + 1),
                    response: r.into(),
                })
                .collect(),
        }
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, LlmError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| LlmError::BadScript(format!("line {}: {msg}", n + 1));
            let parsed: ReplayLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let matcher = match (parsed.step, parsed.digest) {
                (Some(s), None) => ReplayMatch::Step(s),
                (None, Some(d)) => ReplayMatch::Digest(d),
                _ => return Err(bad("exactly one of `step` or `digest` is required".into())),
            };
            let response = match (parsed.response, parsed.decision) {
                (Some(r), None) => r,
                (None, Some(d)) => d.to_string(),
                _ => return Err(bad("exactly one of `response` or `decision` is required".into())),
            };
            entries.push(ReplayEntry { matcher, response });
        }
        let script = Self { entries };
        script.check_unique()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::BadScript(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let line = match &e.matcher {
                ReplayMatch::Step(s) => ReplayLine {
                    step: Some(*s),
                    digest: None,
                    response: Some(e.response.clone()),
                    decision: None,
                },
                ReplayMatch::Digest(d) => ReplayLine {
                    step: None,
                    digest: Some(d.clone()),
                    response: Some(e.response.clone()),
                    decision: None,
                },
            };
            out.push_str(&serde_json::to_string(&line).expect("replay line serializes"));
            out.push('\n');
        }
        out
    }

    fn check_unique(&self) -> Result<(), LlmError> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.matcher) {
                return Err(LlmError::BadScript(format!("duplicate entry {:?}", e.matcher)));
            }
        }
        Ok(())
    }
}

/// Answers from a [`ReplayScript`]. A digest match wins over the call number.
#[derive(Debug)]
pub struct ReplayBackend {
    by_step: HashMap<u32, String>,
    by_digest: HashMap<String, String>,
    calls: AtomicU32,
}

impl ReplayBackend {
    pub fn new(script: ReplayScript) -> Result<Self, LlmError> {
        script.check_unique()?;
        let mut by_step = HashMap::new();
        let mut by_digest = HashMap::new();
        for e in script.entries {
            match e.matcher {
                ReplayMatch::Step(s) => by_step.insert(s, e.response),
                ReplayMatch::Digest(d) => by_digest.insert(d, e.response),
            };
        }
        Ok(Self {
            by_step,
            by_digest,
            calls: AtomicU32::new(0),
        })
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        req.validate()?;
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        let started = std::time::Instant::now();
        let text = self
            .by_digest
            .get(&prompt_digest(&req.prompt))
            .or_else(|| self.by_step.get(&call))
            .ok_or(LlmError::ScriptExhausted { call })?;
        Ok(LlmResponse {
            raw_text: text.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            backend_tag: self.tag().to_string(),
        })
    }

    fn tag(&self) -> &str {
        "replay"
    }
}
