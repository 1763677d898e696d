use std::fmt;

use serde::{Deserialize, Serialize};

/// One atomic GUI interaction chosen by the agent.
///
/// `Tap` and `InputText` ids refer to the refined screen the action was
/// validated against.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Tap { id: u32 },
    InputText { id: u32, text: String },
    Back,
    ScrollUp,
    ScrollDown,
    Terminate,
}

impl Action {
    pub fn element_id(&self) -> Option<u32> {
        match self {
            Action::Tap { id } | Action::InputText { id, .. } => Some(*id),
            _ => None,
        }
    }

    /// Back and scrolling are navigation; they never count as repeats.
    pub fn is_navigation(&self) -> bool {
        matches!(self, Action::Back | Action::ScrollUp | Action::ScrollDown)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Tap { id } => write!(f, "Tap({id})"),
            Action::InputText { id, text } => write!(f, "InputText({id}, {text:?})"),
            Action::Back => f.write_str("Back"),
            Action::ScrollUp => f.write_str("ScrollUp"),
            Action::ScrollDown => f.write_str("ScrollDown"),
            Action::Terminate => f.write_str("Terminate"),
        }
    }
}
