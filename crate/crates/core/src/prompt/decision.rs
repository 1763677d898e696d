use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::screen::{ElementKind, RefinedScreen};
use crate::Action;

/// Sentinel for "no text to type".
pub const NO_VALUE: &str = "<NOVALUE>";

/// Decision keys in schema order.
pub const DECISION_KEYS: [&str; 11] = [
    "goal_action_plan",
    "past_actions_summary",
    "no_further_action_needed",
    "no_further_action_needed_bool",
    "immediate_next_action",
    "current_screen_actions",
    "selected_current_screen_action",
    "repeating_past_action",
    "repeating_past_action_bool",
    "id",
    "text_input_value",
];

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DecisionError {
    #[error("no JSON object found in model output")]
    NoJsonFound,
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{0}` has the wrong type")]
    TypeMismatch(String),
    #[error("id {0} is not an element of the current screen")]
    UnknownElement(i64),
    #[error("text_input_value given for element {0}, which does not accept text")]
    TextOnNonInput(i64),
    #[error("id is -1 but no_further_action_needed_bool is false")]
    InconsistentTermination,
}

/// One `[action, ID]` entry of `current_screen_actions`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenAction {
    pub action: String,
    pub id: i64,
}

/// The `[reasoning, action, ID]` triple.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SelectedAction {
    pub reasoning: String,
    pub action: String,
    pub id: i64,
}

impl Serialize for ScreenAction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.action)?;
        t.serialize_element(&self.id)?;
        t.end()
    }
}

impl Serialize for SelectedAction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(3)?;
        t.serialize_element(&self.reasoning)?;
        t.serialize_element(&self.action)?;
        t.serialize_element(&self.id)?;
        t.end()
    }
}

/// The model's answer for one step. Serializes to the canonical JSON form
/// (keys in schema order, compound fields as arrays).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub goal_action_plan: String,
    pub past_actions_summary: String,
    pub no_further_action_needed: String,
    pub no_further_action_needed_bool: bool,
    pub immediate_next_action: String,
    pub current_screen_actions: Vec<ScreenAction>,
    pub selected_current_screen_action: SelectedAction,
    pub repeating_past_action: String,
    pub repeating_past_action_bool: bool,
    pub id: i64,
    pub text_input_value: String,
}

impl Decision {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("decision serializes")
    }

    pub fn is_termination(&self) -> bool {
        self.id == -1
    }

    /// Minimal well-formed decision selecting `id`, typing `text` if given.
    /// Used for scripted policies.
    pub fn new_action(id: i64, text: Option<&str>) -> Self {
        let verb = if text.is_some() { "input" } else { "tap" };
        Self {
            goal_action_plan: "follow the scripted path".into(),
            past_actions_summary: "scripted".into(),
            no_further_action_needed: "Past Actions do not yet reach the goal".into(),
            no_further_action_needed_bool: false,
            immediate_next_action: format!("{verb} element {id}"),
            current_screen_actions: vec![ScreenAction {
                action: verb.into(),
                id,
            }],
            selected_current_screen_action: SelectedAction {
                reasoning: "next step of the script".into(),
                action: verb.into(),
                id,
            },
            repeating_past_action: "False".into(),
            repeating_past_action_bool: false,
            id,
            text_input_value: text.unwrap_or(NO_VALUE).to_string(),
        }
    }

    /// The termination sentinel.
    pub fn new_termination() -> Self {
        Self {
            no_further_action_needed: "Past Actions reach the goal".into(),
            no_further_action_needed_bool: true,
            immediate_next_action: "none".into(),
            current_screen_actions: Vec::new(),
            selected_current_screen_action: SelectedAction {
                reasoning: "goal reached".into(),
                action: "none".into(),
                id: -1,
            },
            id: -1,
            ..Self::new_action(-1, None)
        }
    }
}

/// Finds the first balanced `{...}` in `raw` that parses as a JSON object.
///
/// Prose and code fences around the object are ignored. Braces inside JSON
/// strings do not count towards balance.
pub fn extract_json_object(raw: &str) -> Option<Map<String, Value>> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(offset) = raw[start..].find('{') {
        let open = start + offset;
        if let Some(close) = balanced_end(bytes, open) {
            if let Ok(Value::Object(map)) = serde_json::from_str(&raw[open..=close]) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts and type-checks a decision; keys are checked in schema order.
pub fn parse_decision(raw: &str) -> Result<Decision, DecisionError> {
    let obj = extract_json_object(raw).ok_or(DecisionError::NoJsonFound)?;
    decision_from_map(&obj)
}

fn decision_from_map(obj: &Map<String, Value>) -> Result<Decision, DecisionError> {
    let f = Fields(obj);
    Ok(Decision {
        goal_action_plan: f.string("goal_action_plan")?,
        past_actions_summary: f.string("past_actions_summary")?,
        no_further_action_needed: f.string("no_further_action_needed")?,
        no_further_action_needed_bool: f.boolean("no_further_action_needed_bool")?,
        immediate_next_action: f.string("immediate_next_action")?,
        current_screen_actions: f.screen_actions("current_screen_actions")?,
        selected_current_screen_action: f.selected("selected_current_screen_action")?,
        repeating_past_action: f.string("repeating_past_action")?,
        repeating_past_action_bool: f.boolean("repeating_past_action_bool")?,
        id: f.integer("id")?,
        text_input_value: f.string("text_input_value")?,
    })
}

impl<'de> Deserialize<'de> for Decision {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let obj = Map::deserialize(d)?;
        decision_from_map(&obj).map_err(serde::de::Error::custom)
    }
}

struct Fields<'a>(&'a Map<String, Value>);

impl Fields<'_> {
    fn get(&self, key: &str) -> Result<&Value, DecisionError> {
        self.0
            .get(key)
            .ok_or_else(|| DecisionError::MissingField(key.to_string()))
    }

    fn mismatch(key: &str) -> DecisionError {
        DecisionError::TypeMismatch(key.to_string())
    }

    fn string(&self, key: &str) -> Result<String, DecisionError> {
        self.get(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Self::mismatch(key))
    }

    fn boolean(&self, key: &str) -> Result<bool, DecisionError> {
        self.get(key)?.as_bool().ok_or_else(|| Self::mismatch(key))
    }

    fn integer(&self, key: &str) -> Result<i64, DecisionError> {
        self.get(key)?.as_i64().ok_or_else(|| Self::mismatch(key))
    }

    fn screen_actions(&self, key: &str) -> Result<Vec<ScreenAction>, DecisionError> {
        let items = self.get(key)?.as_array().ok_or_else(|| Self::mismatch(key))?;
        items
            .iter()
            .map(|item| {
                let (action, id) = match item {
                    Value::Array(pair) if pair.len() == 2 => (pair[0].as_str(), pair[1].as_i64()),
                    Value::Object(m) => (
                        m.get("action").and_then(Value::as_str),
                        id_of(m).and_then(Value::as_i64),
                    ),
                    _ => (None, None),
                };
                match (action, id) {
                    (Some(action), Some(id)) => Ok(ScreenAction {
                        action: action.to_string(),
                        id,
                    }),
                    _ => Err(Self::mismatch(key)),
                }
            })
            .collect()
    }

    fn selected(&self, key: &str) -> Result<SelectedAction, DecisionError> {
        let (reasoning, action, id) = match self.get(key)? {
            Value::Array(t) if t.len() == 3 => (t[0].as_str(), t[1].as_str(), t[2].as_i64()),
            Value::Object(m) => (
                m.get("reasoning").and_then(Value::as_str),
                m.get("action").and_then(Value::as_str),
                id_of(m).and_then(Value::as_i64),
            ),
            _ => (None, None, None),
        };
        match (reasoning, action, id) {
            (Some(r), Some(a), Some(id)) => Ok(SelectedAction {
                reasoning: r.to_string(),
                action: a.to_string(),
                id,
            }),
            _ => Err(Self::mismatch(key)),
        }
    }
}

fn id_of(m: &Map<String, Value>) -> Option<&Value> {
    m.get("ID").or_else(|| m.get("id"))
}

/// A decision mapped onto an executable action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedAction {
    pub action: Action,
    pub decision: Decision,
}

/// Checks a decision against the screen it was made on.
///
/// Only `id`, `text_input_value` and `no_further_action_needed_bool` are
/// load-bearing; the reasoning fields are carried along unchecked.
pub fn validate_decision(
    d: &Decision,
    screen: &RefinedScreen,
) -> Result<ValidatedAction, DecisionError> {
    if d.id == -1 {
        if !d.no_further_action_needed_bool {
            return Err(DecisionError::InconsistentTermination);
        }
        return Ok(ValidatedAction {
            action: Action::Terminate,
            decision: d.clone(),
        });
    }
    let el = screen
        .element(d.id)
        .ok_or(DecisionError::UnknownElement(d.id))?;
    let has_text = d.text_input_value != NO_VALUE;
    if has_text && !el.input_capable {
        return Err(DecisionError::TextOnNonInput(d.id));
    }
    let action = match el.kind {
        ElementKind::SyntheticBack => Action::Back,
        ElementKind::SyntheticScrollUp => Action::ScrollUp,
        ElementKind::SyntheticScrollDown => Action::ScrollDown,
        ElementKind::Input if has_text => Action::InputText {
            id: el.id,
            text: d.text_input_value.clone(),
        },
        ElementKind::Input | ElementKind::Tap | ElementKind::Check => Action::Tap { id: el.id },
    };
    if d.no_further_action_needed_bool {
        log::warn!(
            "decision marks the goal as reached but selects id {}; executing the action",
            d.id
        );
    }
    Ok(ValidatedAction {
        action,
        decision: d.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screen::{parse_screen, refine, RawScreen, RefineOptions, TableLabeler};
    use serde_json::json;

    pub(crate) fn decision_json(id: i64, text: &str, done: bool) -> Value {
        json!({
            "goal_action_plan": "plan",
            "past_actions_summary": "none",
            "no_further_action_needed": if done { "Past Actions indicate the goal is met" } else { "Past Actions do not indicate the goal is met" },
            "no_further_action_needed_bool": done,
            "immediate_next_action": "next",
            "current_screen_actions": [["tap Login", 2]],
            "selected_current_screen_action": ["because", "tap Login", id],
            "repeating_past_action": "no",
            "repeating_past_action_bool": false,
            "id": id,
            "text_input_value": text,
        })
    }

    fn screen() -> RefinedScreen {
        let xml = r#"<hierarchy>
            <node class="android.widget.EditText" hint="Email"/>
            <node class="android.widget.EditText" hint="Password"/>
            <node class="android.widget.Button" text="Login" clickable="true"/>
            <node class="android.widget.CheckBox" text="Remember" checkable="true"/>
            <node class="android.widget.ScrollView" scrollable="true"/>
        </hierarchy>"#;
        let root = parse_screen(&RawScreen::new(xml, "t")).unwrap();
        refine(&root, &TableLabeler::default(), &RefineOptions::default())
    }

    #[test]
    fn termination_decision() {
        let d = parse_decision(&decision_json(-1, NO_VALUE, true).to_string()).unwrap();
        assert!(d.is_termination());
        assert!(d.no_further_action_needed_bool);
        let v = validate_decision(&d, &screen()).unwrap();
        assert_eq!(v.action, Action::Terminate);
    }

    #[test]
    fn tolerates_prose_and_fences() {
        let body = decision_json(2, NO_VALUE, false).to_string();
        let raw = format!("Sure! Here is my answer {{not json}}:\n```json\n{body}\n```\nThanks.");
        let d = parse_decision(&raw).unwrap();
        assert_eq!(d.id, 2);
    }

    #[test]
    fn braces_inside_strings() {
        let mut v = decision_json(2, NO_VALUE, false);
        v["goal_action_plan"] = json!("use {braces} and \"quotes\" }");
        let d = parse_decision(&format!("x {v} y")).unwrap();
        assert_eq!(d.goal_action_plan, "use {braces} and \"quotes\" }");
    }

    #[test]
    fn object_form_of_compound_fields() {
        let mut v = decision_json(2, NO_VALUE, false);
        v["current_screen_actions"] = json!([{"action": "tap", "ID": 2}]);
        v["selected_current_screen_action"] = json!({"reasoning": "r", "action": "a", "id": 2});
        let d = parse_decision(&v.to_string()).unwrap();
        assert_eq!(d.current_screen_actions[0].id, 2);
        assert_eq!(d.selected_current_screen_action.reasoning, "r");
    }

    #[test]
    fn schema_errors() {
        assert_eq!(parse_decision("no json here"), Err(DecisionError::NoJsonFound));
        assert_eq!(parse_decision("[1,2]"), Err(DecisionError::NoJsonFound));
        let mut v = decision_json(2, NO_VALUE, false);
        v.as_object_mut().unwrap().remove("id");
        assert_eq!(
            parse_decision(&v.to_string()),
            Err(DecisionError::MissingField("id".into()))
        );
        let mut v = decision_json(2, NO_VALUE, false);
        v["id"] = json!("3");
        assert_eq!(
            parse_decision(&v.to_string()),
            Err(DecisionError::TypeMismatch("id".into()))
        );
        let mut v = decision_json(2, NO_VALUE, false);
        v["id"] = json!(2.5);
        assert_eq!(
            parse_decision(&v.to_string()),
            Err(DecisionError::TypeMismatch("id".into()))
        );
    }

    #[test]
    fn validation_mapping() {
        let s = screen();
        let parse = |id, text: &str, done| parse_decision(&decision_json(id, text, done).to_string()).unwrap();
        assert_eq!(
            validate_decision(&parse(2, NO_VALUE, false), &s).unwrap().action,
            Action::Tap { id: 2 }
        );
        assert_eq!(
            validate_decision(&parse(0, "alice", false), &s).unwrap().action,
            Action::InputText { id: 0, text: "alice".into() }
        );
        assert_eq!(
            validate_decision(&parse(0, NO_VALUE, false), &s).unwrap().action,
            Action::Tap { id: 0 }
        );
        assert_eq!(
            validate_decision(&parse(3, NO_VALUE, false), &s).unwrap().action,
            Action::Tap { id: 3 }
        );
        assert_eq!(
            validate_decision(&parse(4, NO_VALUE, false), &s).unwrap().action,
            Action::ScrollUp
        );
        assert_eq!(
            validate_decision(&parse(5, NO_VALUE, false), &s).unwrap().action,
            Action::ScrollDown
        );
        assert_eq!(
            validate_decision(&parse(6, NO_VALUE, false), &s).unwrap().action,
            Action::Back
        );
    }

    #[test]
    fn validation_errors() {
        let s = screen();
        let parse = |id, text: &str, done| parse_decision(&decision_json(id, text, done).to_string()).unwrap();
        assert_eq!(
            validate_decision(&parse(7, NO_VALUE, false), &s),
            Err(DecisionError::UnknownElement(7))
        );
        assert_eq!(
            validate_decision(&parse(-2, NO_VALUE, false), &s),
            Err(DecisionError::UnknownElement(-2))
        );
        assert_eq!(
            validate_decision(&parse(2, "hello", false), &s),
            Err(DecisionError::TextOnNonInput(2))
        );
        assert_eq!(
            validate_decision(&parse(-1, NO_VALUE, false), &s),
            Err(DecisionError::InconsistentTermination)
        );
    }

    #[test]
    fn goal_reached_flag_with_real_id_still_acts() {
        let s = screen();
        let d = parse_decision(&decision_json(2, NO_VALUE, true).to_string()).unwrap();
        assert_eq!(validate_decision(&d, &s).unwrap().action, Action::Tap { id: 2 });
    }

    #[test]
    fn canonical_json_key_order() {
        let d = parse_decision(&decision_json(2, NO_VALUE, false).to_string()).unwrap();
        let json = d.to_canonical_json();
        let positions: Vec<usize> = DECISION_KEYS
            .iter()
            .map(|k| json.find(&format!("\"{k}\":")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(parse_decision(&json).unwrap(), d);
    }
}
