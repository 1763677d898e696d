//! Device backends.
//!
//! A [`DeviceSession`] captures the current UI hierarchy and executes actions.
//! [`webdriver`] drives a real device through an automation server;
//! [`sim`] is a deterministic in-process application model.

pub mod sim;
pub mod webdriver;

use crate::screen::{Locator, RawScreen};
use crate::Action;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("session rejected: {0}")]
    SessionRejected(String),
    #[error("session is gone")]
    SessionGone,
    #[error("element not found: {0}")]
    ElementNotFound(String),
    #[error("action rejected: {0}")]
    ActionRejected(String),
    #[error("locator matches no element: {0}")]
    UnknownElement(String),
}

impl DeviceError {
    /// Errors after which the session cannot be used any further.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            DeviceError::TransportError(_) | DeviceError::SessionGone | DeviceError::SessionRejected(_)
        )
    }
}

/// One device driven by one agent session at a time.
///
/// After `execute` returns `Ok`, the next `capture_source` reflects the state
/// the action led to.
pub trait DeviceSession: Send {
    fn capture_source(&mut self) -> Result<RawScreen, DeviceError>;

    /// `act` is never [`Action::Terminate`].
    fn execute(&mut self, loc: &Locator, act: &Action) -> Result<(), DeviceError>;

    /// Idempotent.
    fn close(&mut self) -> Result<(), DeviceError>;

    fn backend_tag(&self) -> &str;
}
