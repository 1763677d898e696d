//! Natural-language GUI test execution.
//!
//! The crate turns a UI-hierarchy dump into a compact, numbered screen
//! description, asks an LLM for one action per step, executes that action on a
//! device (a WebDriver automation server or the in-process simulator) and
//! records everything needed to score runs and build fine-tuning data.
//!
//! Module map:
//!
//! * [`screen`]: XML parsing, refinement into actionable elements, rendering,
//!   locator resolution.
//! * [`prompt`]: the structured prompt and the JSON decision schema.
//! * [`llm`]: chat-completion client, replay backend, exchange recorder.
//! * [`device`]: the [`device::DeviceSession`] interface, the WebDriver client
//!   and the simulator with its shortest-path oracle.
//! * [`agent`]: the decide/execute loop, repeat guard, recovery accounting and
//!   trace files.
//! * [`eval`]: suite runner, metrics, reports, description linter and the
//!   distillation exporter.

pub mod action;
pub mod agent;
pub mod device;
pub mod eval;
pub mod llm;
pub mod prompt;
pub mod screen;

pub use action::Action;

/// Milliseconds since the Unix epoch.
pub fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
