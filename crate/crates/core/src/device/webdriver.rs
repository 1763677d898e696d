//! WebDriver-protocol client for an Appium-style automation server.
//!
//! Endpoints used:
//!
//! | action     | requests |
//! |------------|----------|
//! | open       | `POST /session` |
//! | capture    | `GET /session/{id}/source` |
//! | tap        | `POST /session/{id}/element`, `POST /session/{id}/element/{eid}/click` |
//! | input      | `POST /session/{id}/element`, `POST /session/{id}/element/{eid}/value` |
//! | back       | `POST /session/{id}/back` |
//! | scroll     | `POST /session/{id}/element` (first scrollable), `POST /session/{id}/execute/sync` |
//! | close      | `DELETE /session/{id}` |

use std::time::Duration;

use serde_json::{json, Map, Value};

use super::{DeviceError, DeviceSession};
use crate::screen::{Locator, RawScreen};
use crate::Action;

const W3C_ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";
const SCROLLABLE_XPATH: &str = "//*[@scrollable='true']";

/// Connection state of a WebDriver session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WdSessionState {
    pub base_url: String,
    pub session_id: String,
    pub open: bool,
}

#[derive(Debug)]
pub struct WebDriverSession {
    state: WdSessionState,
    agent: ureq::Agent,
}

/// `POST /session` with the given capabilities (sent as W3C `alwaysMatch`).
pub fn open_session(
    base_url: &str,
    capabilities: &Map<String, Value>,
) -> Result<WebDriverSession, DeviceError> {
    open_session_with_timeout(base_url, capabilities, Duration::from_secs(60))
}

pub fn open_session_with_timeout(
    base_url: &str,
    capabilities: &Map<String, Value>,
    timeout: Duration,
) -> Result<WebDriverSession, DeviceError> {
    let base_url = base_url.trim_end_matches('/').to_string();
    let agent = ureq::AgentBuilder::new().timeout(timeout).build();
    let body = json!({"capabilities": {"alwaysMatch": capabilities}});
    let resp = agent
        .post(&format!("{base_url}/session"))
        .send_json(body)
        .map_err(|e| match e {
            ureq::Error::Status(_, r) => DeviceError::SessionRejected(error_message(&read_json(r))),
            ureq::Error::Transport(t) => DeviceError::TransportError(t.to_string()),
        })?;
    let body = read_json(resp);
    let session_id = body
        .pointer("/value/sessionId")
        .or_else(|| body.get("sessionId"))
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| DeviceError::SessionRejected(format!("no sessionId in response: {body}")))?
        .to_string();
    Ok(WebDriverSession {
        state: WdSessionState {
            base_url,
            session_id,
            open: true,
        },
        agent,
    })
}

fn read_json(resp: ureq::Response) -> Value {
    resp.into_string()
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(Value::Null)
}

fn error_message(body: &Value) -> String {
    body.pointer("/value/message")
        .and_then(Value::as_str)
        .or_else(|| body.pointer("/value/error").and_then(Value::as_str))
        .map(str::to_string)
        .unwrap_or_else(|| body.to_string())
}

fn map_protocol_error(body: &Value) -> DeviceError {
    let code = body.pointer("/value/error").and_then(Value::as_str).unwrap_or("");
    let message = error_message(body);
    match code {
        "no such element" | "stale element reference" => DeviceError::ElementNotFound(message),
        "invalid session id" => DeviceError::SessionGone,
        _ => DeviceError::ActionRejected(message),
    }
}

impl WebDriverSession {
    pub fn state(&self) -> &WdSessionState {
        &self.state
    }

    pub fn session_id(&self) -> &str {
        &self.state.session_id
    }

    fn url(&self, suffix: &str) -> String {
        format!("{}/session/{}{}", self.state.base_url, self.state.session_id, suffix)
    }

    fn call(&self, method: &str, suffix: &str, body: Option<Value>) -> Result<Value, DeviceError> {
        if !self.state.open {
            return Err(DeviceError::SessionGone);
        }
        let req = self.agent.request(method, &self.url(suffix));
        let result = match body {
            Some(b) => req.send_json(b),
            None => req.call(),
        };
        let body = match result {
            Ok(resp) => read_json(resp),
            Err(ureq::Error::Status(_, resp)) => return Err(map_protocol_error(&read_json(resp))),
            Err(ureq::Error::Transport(t)) => return Err(DeviceError::TransportError(t.to_string())),
        };
        // Legacy JSON wire protocol reports failures in a `status` field.
        match body.get("status").and_then(Value::as_i64) {
            None | Some(0) => Ok(body),
            Some(7) | Some(10) => Err(DeviceError::ElementNotFound(error_message(&body))),
            Some(6) => Err(DeviceError::SessionGone),
            Some(_) => Err(DeviceError::ActionRejected(error_message(&body))),
        }
    }

    fn find_element(&self, using: &str, value: &str) -> Result<String, DeviceError> {
        let body = self.call("POST", "/element", Some(json!({"using": using, "value": value})))?;
        let value = body.get("value").unwrap_or(&Value::Null);
        value
            .get(W3C_ELEMENT_KEY)
            .or_else(|| value.get("ELEMENT"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| DeviceError::ElementNotFound(format!("{using}={value}")))
    }

    fn find_by_locator(&self, loc: &Locator) -> Result<String, DeviceError> {
        match loc {
            Locator::ResourceId(id) => self.find_element("id", id),
            Locator::Path(p) => self.find_element("xpath", &Locator::xpath(p)),
            other => Err(DeviceError::ActionRejected(format!(
                "locator {other} does not name an element"
            ))),
        }
    }

    fn scroll(&self, direction: &str) -> Result<(), DeviceError> {
        let eid = self.find_element("xpath", SCROLLABLE_XPATH)?;
        self.call(
            "POST",
            "/execute/sync",
            Some(json!({
                "script": "mobile: scrollGesture",
                "args": [{"elementId": eid, "direction": direction, "percent": 0.75}],
            })),
        )?;
        Ok(())
    }
}

impl DeviceSession for WebDriverSession {
    fn capture_source(&mut self) -> Result<RawScreen, DeviceError> {
        let body = self.call("GET", "/source", None)?;
        let source = body
            .get("value")
            .and_then(Value::as_str)
            .ok_or_else(|| DeviceError::TransportError("source response has no string value".into()))?;
        Ok(RawScreen::new(source, self.backend_tag()))
    }

    fn execute(&mut self, loc: &Locator, act: &Action) -> Result<(), DeviceError> {
        match act {
            Action::Tap { .. } => {
                let eid = self.find_by_locator(loc)?;
                self.call("POST", &format!("/element/{eid}/click"), Some(json!({})))?;
            }
            Action::InputText { text, .. } => {
                let eid = self.find_by_locator(loc)?;
                self.call(
                    "POST",
                    &format!("/element/{eid}/value"),
                    Some(json!({"text": text})),
                )?;
            }
            Action::Back => {
                self.call("POST", "/back", Some(json!({})))?;
            }
            Action::ScrollUp => self.scroll("up")?,
            Action::ScrollDown => self.scroll("down")?,
            Action::Terminate => {
                return Err(DeviceError::ActionRejected("Terminate is not executable".into()))
            }
        }
        Ok(())
    }

    fn close(&mut self) -> Result<(), DeviceError> {
        if !self.state.open {
            return Ok(());
        }
        let result = self.call("DELETE", "", None);
        self.state.open = false;
        match result {
            Ok(_) | Err(DeviceError::SessionGone) => Ok(()),
            Err(e) => Err(e),
        }
    }

    fn backend_tag(&self) -> &str {
        "webdriver"
    }
}

impl Drop for WebDriverSession {
    fn drop(&mut self) {
        if self.state.open {
            if let Err(e) = self.close() {
                log::debug!("closing webdriver session on drop: {e}");
            }
        }
    }
}
