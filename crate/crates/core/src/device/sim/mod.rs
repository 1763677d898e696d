//! Deterministic application simulator.
//!
//! An app is a set of screen templates plus labelled transitions between them
//! and a flat text store. The simulator renders screens in the same XML
//! dialect real devices produce, so the whole refine/prompt/execute loop runs
//! unchanged against it. [`oracle`] adds breadth-first search over the app's
//! state graph for shortest action sequences and ground-truth error labels.

mod engine;
pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use engine::{check_goal, sim_capture, sim_execute, SimSession, SimState};
pub use oracle::{
    actions_for_path, label_trace, oracle_shortest_path, script_for_path, Oracle, OracleError, OracleLabels,
    PathStep, SimMove,
};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("app spec parse error: {0}")]
    SpecParseError(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
}

/// The whole simulated application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimAppSpec {
    pub spec_version: u32,
    /// Package name used in resource ids.
    #[serde(default = "default_app")]
    pub app: String,
    pub screens: BTreeMap<String, ScreenTemplate>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    pub initial_screen: String,
    #[serde(default)]
    pub variables: BTreeMap<String, String>,
}

fn default_app() -> String {
    "com.example.sim".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScreenTemplate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default)]
    pub scrollable: bool,
    #[serde(default)]
    pub elements: Vec<ElementTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementTemplate {
    pub label: String,
    /// Widget class; derived from the flags when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub checkable: bool,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_id: Option<String>,
    /// Store slot written by text input or toggled by a checkable; defaults to
    /// the label for inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
}

fn yes() -> bool {
    true
}

impl ElementTemplate {
    pub fn class_name(&self) -> &str {
        match &self.class {
            Some(c) => c,
            None if self.checkable => "android.widget.Switch",
            None if self.clickable => "android.widget.Button",
            None => "android.widget.TextView",
        }
    }

    pub fn is_input(&self) -> bool {
        let c = self.class_name();
        c.ends_with("EditText") || c.ends_with("AutoCompleteTextView")
    }

    pub fn is_image(&self) -> bool {
        let c = self.class_name();
        c.ends_with("ImageView") || c.ends_with("ImageButton")
    }

    pub fn is_interactive(&self) -> bool {
        self.clickable || self.checkable || self.is_input()
    }

    /// Store slot for text input.
    pub fn input_slot(&self) -> &str {
        self.variable.as_deref().unwrap_or(&self.label)
    }
}

/// What fires a transition: tapping the labelled element, or typing exactly
/// `text` into it when `text` is set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trigger {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effect {
    pub variable: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub trigger: Trigger,
    pub to: String,
    #[serde(default)]
    pub effects: Vec<Effect>,
}

/// One condition of a goal; untagged in JSON:
/// `{"variable": "x", "equals": "y"}` or `{"screen_is": "home"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoalCondition {
    Variable { variable: String, equals: String },
    ScreenIs { screen_is: String },
}

/// Expected final state; holds iff every condition holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalPredicate {
    pub conditions: Vec<GoalCondition>,
}

impl GoalPredicate {
    pub fn variable(name: impl Into<String>, equals: impl Into<String>) -> Self {
        Self {
            conditions: vec![GoalCondition::Variable {
                variable: name.into(),
                equals: equals.into(),
            }],
        }
    }
}

/// Parses and validates an app-spec JSON document.
pub fn load_spec(doc: &str) -> Result<SimAppSpec, SimError> {
    let spec: SimAppSpec =
        serde_json::from_str(doc).map_err(|e| SimError::SpecParseError(e.to_string()))?;
    validate(&spec)?;
    Ok(spec)
}

pub fn load_spec_file(path: &std::path::Path) -> Result<SimAppSpec, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::SpecParseError(format!("{}: {e}", path.display())))?;
    load_spec(&text)
}

fn validate(spec: &SimAppSpec) -> Result<(), SimError> {
    if spec.spec_version != SPEC_VERSION {
        return Err(SimError::SpecParseError(format!(
            "unsupported spec_version {} (expected {SPEC_VERSION})",
            spec.spec_version
        )));
    }
    if !spec.screens.contains_key(&spec.initial_screen) {
        return Err(SimError::DanglingReference(format!(
            "initial_screen `{}` is not a screen",
            spec.initial_screen
        )));
    }
    for (id, screen) in &spec.screens {
        let mut labels = BTreeSet::new();
        for el in screen.elements.iter().filter(|e| e.is_interactive()) {
            if el.label.trim().is_empty() {
                return Err(SimError::SpecParseError(format!(
                    "screen `{id}` has an interactive element without a label"
                )));
            }
            if !labels.insert(el.label.as_str()) {
                return Err(SimError::SpecParseError(format!(
                    "screen `{id}` has two interactive elements labelled `{}`",
                    el.label
                )));
            }
        }
    }
    for (i, t) in spec.transitions.iter().enumerate() {
        let from = spec.screens.get(&t.from).ok_or_else(|| {
            SimError::DanglingReference(format!("transition {i}: unknown source screen `{}`", t.from))
        })?;
        if !spec.screens.contains_key(&t.to) {
            return Err(SimError::DanglingReference(format!(
                "transition {i}: unknown target screen `{}`",
                t.to
            )));
        }
        let el = from
            .elements
            .iter()
            .find(|e| e.is_interactive() && e.label == t.trigger.label)
            .ok_or_else(|| {
                SimError::DanglingReference(format!(
                    "transition {i}: no interactive element `{}` on screen `{}`",
                    t.trigger.label, t.from
                ))
            })?;
        if t.trigger.text.is_some() && !el.is_input() {
            return Err(SimError::DanglingReference(format!(
                "transition {i}: `{}` does not accept text",
                t.trigger.label
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"spec_version":1,"screens":{"home":{"elements":[]}},"initial_screen":"home"}"#;

    #[test]
    fn minimal_spec_loads() {
        let spec = load_spec(MINIMAL).unwrap();
        assert!(spec.screens.contains_key(&spec.initial_screen));
        assert!(spec.transitions.is_empty());
    }

    #[test]
    fn dangling_transition_target() {
        let doc = r#"{"spec_version":1,"initial_screen":"a",
            "screens":{"a":{"elements":[{"label":"Go","clickable":true}]}},
            "transitions":[{"from":"a","trigger":{"label":"Go"},"to":"nowhere"}]}"#;
        assert!(matches!(load_spec(doc), Err(SimError::DanglingReference(_))));
    }

    #[test]
    fn dangling_trigger_label_and_initial() {
        let doc = r#"{"spec_version":1,"initial_screen":"a",
            "screens":{"a":{"elements":[{"label":"Go","clickable":true}]}},
            "transitions":[{"from":"a","trigger":{"label":"Stop"},"to":"a"}]}"#;
        assert!(matches!(load_spec(doc), Err(SimError::DanglingReference(_))));
        let doc = r#"{"spec_version":1,"initial_screen":"zzz","screens":{"a":{}}}"#;
        assert!(matches!(load_spec(doc), Err(SimError::DanglingReference(_))));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(load_spec("{"), Err(SimError::SpecParseError(_))));
        let wrong_version = MINIMAL.replace("\"spec_version\":1", "\"spec_version\":9");
        assert!(matches!(load_spec(&wrong_version), Err(SimError::SpecParseError(_))));
        let dup = r#"{"spec_version":1,"initial_screen":"a",
            "screens":{"a":{"elements":[{"label":"Go","clickable":true},{"label":"Go","clickable":true}]}}}"#;
        assert!(matches!(load_spec(dup), Err(SimError::SpecParseError(_))));
    }

    #[test]
    fn text_trigger_needs_input_element() {
        let doc = r#"{"spec_version":1,"initial_screen":"a",
            "screens":{"a":{"elements":[{"label":"Go","clickable":true}]}},
            "transitions":[{"from":"a","trigger":{"label":"Go","text":"x"},"to":"a"}]}"#;
        assert!(matches!(load_spec(doc), Err(SimError::DanglingReference(_))));
    }

    #[test]
    fn goal_condition_json_shapes() {
        let g: GoalPredicate = serde_json::from_str(
            r#"{"conditions":[{"variable":"contact_X","equals":"deleted"},{"screen_is":"list"}]}"#,
        )
        .unwrap();
        assert_eq!(g.conditions.len(), 2);
        assert!(matches!(g.conditions[1], GoalCondition::ScreenIs { .. }));
    }
}
