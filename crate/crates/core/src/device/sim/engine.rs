use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ElementTemplate, GoalCondition, GoalPredicate, SimAppSpec};
use crate::device::{DeviceError, DeviceSession};
use crate::screen::{to_xml, Locator, RawScreen, UiNode};
use crate::Action;

/// Mutable part of a simulated app.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimState {
    pub current: String,
    /// Screens to return to on Back, most recent last. Never ends with
    /// `current`.
    pub back_stack: Vec<String>,
    pub store: BTreeMap<String, String>,
}

impl SimState {
    pub fn initial(spec: &SimAppSpec) -> Self {
        Self {
            current: spec.initial_screen.clone(),
            back_stack: Vec::new(),
            store: spec.variables.clone(),
        }
    }
}

fn node(tag: &str, class: &str, attrs: &[(&str, String)], children: Vec<UiNode>) -> UiNode {
    let mut attributes: BTreeMap<String, String> = [
        ("class", class.to_string()),
        ("text", String::new()),
        ("content-desc", String::new()),
        ("resource-id", String::new()),
        ("clickable", "false".into()),
        ("checkable", "false".into()),
        ("checked", "false".into()),
        ("enabled", "true".into()),
        ("scrollable", "false".into()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    for (k, v) in attrs {
        attributes.insert(k.to_string(), v.clone());
    }
    UiNode {
        tag: tag.to_string(),
        class_name: class.to_string(),
        attributes,
        children,
        doc_index: 0,
    }
}

pub(crate) fn template_resource_id(spec: &SimAppSpec, screen: &str, idx: usize, el: &ElementTemplate) -> String {
    match &el.resource_id {
        Some(r) => r.clone(),
        None => format!("{}:id/{}_{}", spec.app, screen, idx),
    }
}

fn bool_str(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

fn element_node(spec: &SimAppSpec, state: &SimState, idx: usize, el: &ElementTemplate) -> UiNode {
    let top = 300 + idx * 160;
    let mut attrs = vec![
        ("index", idx.to_string()),
        ("package", spec.app.clone()),
        ("resource-id", template_resource_id(spec, &state.current, idx, el)),
        ("clickable", bool_str(el.clickable || el.is_input())),
        ("checkable", bool_str(el.checkable)),
        ("enabled", bool_str(el.enabled)),
        ("focusable", bool_str(el.is_interactive())),
        ("bounds", format!("[0,{}][1080,{}]", top, top + 140)),
    ];
    if el.is_input() {
        let value = state.store.get(el.input_slot()).cloned().unwrap_or_default();
        attrs.push(("hint", el.label.clone()));
        attrs.push(("text", value));
    } else if el.is_image() {
        attrs.push(("content-desc", el.label.clone()));
    } else {
        attrs.push(("text", el.label.clone()));
    }
    if el.checkable {
        let on = el
            .variable
            .as_ref()
            .and_then(|v| state.store.get(v))
            .is_some_and(|v| v == "true");
        attrs.push(("checked", bool_str(on)));
    }
    node("node", el.class_name(), &attrs, vec![])
}

/// Builds the hierarchy for the current screen.
pub(crate) fn screen_tree(state: &SimState, spec: &SimAppSpec) -> UiNode {
    let template = &spec.screens[&state.current];
    let elements: Vec<UiNode> = template
        .elements
        .iter()
        .enumerate()
        .map(|(i, el)| element_node(spec, state, i, el))
        .collect();
    let container = if template.scrollable {
        node(
            "node",
            "android.widget.ScrollView",
            &[
                ("package", spec.app.clone()),
                ("resource-id", format!("{}:id/scroll", spec.app)),
                ("scrollable", "true".into()),
            ],
            elements,
        )
    } else {
        node(
            "node",
            "android.widget.LinearLayout",
            &[("package", spec.app.clone())],
            elements,
        )
    };
    let mut content = Vec::new();
    if let Some(title) = &template.title {
        content.push(node(
            "node",
            "android.widget.TextView",
            &[
                ("package", spec.app.clone()),
                ("resource-id", format!("{}:id/title", spec.app)),
                ("text", title.clone()),
            ],
            vec![],
        ));
    }
    content.push(container);
    let frame = node(
        "node",
        "android.widget.FrameLayout",
        &[
            ("package", spec.app.clone()),
            ("resource-id", "android:id/content".into()),
            ("bounds", "[0,0][1080,2340]".into()),
        ],
        content,
    );
    UiNode {
        tag: "hierarchy".into(),
        class_name: "hierarchy".into(),
        attributes: [("rotation".to_string(), "0".to_string())].into_iter().collect(),
        children: vec![frame],
        doc_index: 0,
    }
}

/// Renders the current screen as a UI-hierarchy dump.
pub fn sim_capture(state: &SimState, spec: &SimAppSpec) -> RawScreen {
    RawScreen::new(to_xml(&screen_tree(state, spec)), "sim")
}

fn resolve_template(state: &SimState, spec: &SimAppSpec, loc: &Locator) -> Result<usize, DeviceError> {
    let template = &spec.screens[&state.current];
    let rid = match loc {
        Locator::ResourceId(r) => r.clone(),
        Locator::Path(p) => {
            let tree = screen_tree(state, spec);
            tree.at_path(p)
                .map(|n| n.attr_or_empty("resource-id").to_string())
                .ok_or_else(|| DeviceError::UnknownElement(loc.to_string()))?
        }
        other => {
            return Err(DeviceError::UnknownElement(format!(
                "{other} does not name an element"
            )))
        }
    };
    template
        .elements
        .iter()
        .enumerate()
        .find(|(i, el)| template_resource_id(spec, &state.current, *i, el) == rid)
        .map(|(i, _)| i)
        .ok_or_else(|| DeviceError::UnknownElement(loc.to_string()))
}

/// Effect of tapping (`text = None`) or typing into template `idx`.
pub(crate) fn activate(
    state: &SimState,
    spec: &SimAppSpec,
    idx: usize,
    text: Option<&str>,
) -> Result<SimState, DeviceError> {
    let el = &spec.screens[&state.current].elements[idx];
    if !el.enabled {
        return Err(DeviceError::ActionRejected(format!("`{}` is disabled", el.label)));
    }
    if text.is_some() && !el.is_input() {
        return Err(DeviceError::ActionRejected(format!(
            "`{}` does not accept text",
            el.label
        )));
    }
    let mut next = state.clone();
    if let Some(t) = text {
        next.store.insert(el.input_slot().to_string(), t.to_string());
    } else if el.checkable {
        if let Some(var) = &el.variable {
            let on = next.store.get(var).is_some_and(|v| v == "true");
            next.store.insert(var.clone(), bool_str(!on));
        }
    }
    let fired = spec.transitions.iter().find(|t| {
        t.from == state.current
            && t.trigger.label == el.label
            && match (&t.trigger.text, text) {
                (None, None) => true,
                (None, Some(_)) => true,
                (Some(want), Some(got)) => want == got,
                (Some(_), None) => false,
            }
    });
    if let Some(t) = fired {
        if t.to != next.current {
            let from = std::mem::replace(&mut next.current, t.to.clone());
            next.back_stack.push(from);
        }
        for e in &t.effects {
            next.store.insert(e.variable.clone(), e.value.clone());
        }
    }
    Ok(next)
}

pub(crate) fn go_back(state: &SimState) -> SimState {
    let mut next = state.clone();
    if let Some(prev) = next.back_stack.pop() {
        next.current = prev;
    }
    next
}

/// Applies one action.
///
/// Tap/InputText fire the first matching transition (push, move, apply
/// effects). Typed text is also stored in the element's slot and tapping a
/// checkable with a variable toggles it. Back pops the stack (no-op when
/// empty); scrolling never changes state.
pub fn sim_execute(
    state: &SimState,
    spec: &SimAppSpec,
    loc: &Locator,
    act: &Action,
) -> Result<SimState, DeviceError> {
    match act {
        Action::Back => Ok(go_back(state)),
        Action::ScrollUp | Action::ScrollDown => Ok(state.clone()),
        Action::Tap { .. } => activate(state, spec, resolve_template(state, spec, loc)?, None),
        Action::InputText { text, .. } => {
            activate(state, spec, resolve_template(state, spec, loc)?, Some(text))
        }
        Action::Terminate => Err(DeviceError::ActionRejected(
            "Terminate is not executable".into(),
        )),
    }
}

/// True iff the condition list is non-empty and every condition holds. A
/// variable missing from the store never matches.
pub fn check_goal(state: &SimState, goal: &GoalPredicate) -> bool {
    !goal.conditions.is_empty()
        && goal.conditions.iter().all(|c| match c {
            GoalCondition::Variable { variable, equals } => state.store.get(variable) == Some(equals),
            GoalCondition::ScreenIs { screen_is } => &state.current == screen_is,
        })
}

/// [`DeviceSession`] over a simulated app.
#[derive(Debug, Clone)]
pub struct SimSession {
    spec: Arc<SimAppSpec>,
    state: SimState,
    closed: bool,
}

impl SimSession {
    pub fn new(spec: Arc<SimAppSpec>) -> Self {
        let state = SimState::initial(&spec);
        Self {
            spec,
            state,
            closed: false,
        }
    }

    pub fn with_state(spec: Arc<SimAppSpec>, state: SimState) -> Self {
        Self {
            spec,
            state,
            closed: false,
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn spec(&self) -> &SimAppSpec {
        &self.spec
    }

    pub fn goal_holds(&self, goal: &GoalPredicate) -> bool {
        check_goal(&self.state, goal)
    }
}

impl DeviceSession for SimSession {
    fn capture_source(&mut self) -> Result<RawScreen, DeviceError> {
        if self.closed {
            return Err(DeviceError::SessionGone);
        }
        Ok(sim_capture(&self.state, &self.spec))
    }

    fn execute(&mut self, loc: &Locator, act: &Action) -> Result<(), DeviceError> {
        if self.closed {
            return Err(DeviceError::SessionGone);
        }
        self.state = sim_execute(&self.state, &self.spec, loc, act)?;
        Ok(())
    }

    fn close(&mut self) -> Result<(), DeviceError> {
        self.closed = true;
        Ok(())
    }

    fn backend_tag(&self) -> &str {
        "sim"
    }
}
