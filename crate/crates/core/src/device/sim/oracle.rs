//! Breadth-first search over simulator states.
//!
//! A search state is the full [`SimState`]: screen, back stack and store. The
//! back stack matters because Back is a legal move and its target depends on
//! history. A search never grows the stack by more than the number of
//! screens, which keeps the graph finite.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::engine::{activate, go_back, sim_capture};
use super::{check_goal, sim_execute, GoalPredicate, SimAppSpec, SimState};
use crate::llm::ReplayScript;
use crate::prompt::Decision;
use crate::screen::{refine_source, resolve_locator};
use crate::Action;

/// Upper bound on explored states per search.
const STATE_BUDGET: usize = 200_000;

/// One move in the app graph, named by element label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum SimMove {
    Tap { label: String },
    Input { label: String, text: String },
    Back,
}

/// A move and the screen it was made on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub screen: String,
    pub trigger: SimMove,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("goal is unreachable from the initial state")]
    NoPath,
    #[error("cannot map move onto the rendered screen: {0}")]
    Unmatched(String),
}

fn moves(spec: &SimAppSpec, state: &SimState) -> Vec<(SimMove, SimState)> {
    let mut out = Vec::new();
    let screen = &spec.screens[&state.current];
    for (idx, el) in screen.elements.iter().enumerate() {
        if !el.is_interactive() || !el.enabled {
            continue;
        }
        if let Ok(next) = activate(state, spec, idx, None) {
            out.push((SimMove::Tap { label: el.label.clone() }, next));
        }
        if el.is_input() {
            let texts: Vec<&String> = spec
                .transitions
                .iter()
                .filter(|t| t.from == state.current && t.trigger.label == el.label)
                .filter_map(|t| t.trigger.text.as_ref())
                .collect();
            for text in texts {
                if let Ok(next) = activate(state, spec, idx, Some(text)) {
                    out.push((
                        SimMove::Input {
                            label: el.label.clone(),
                            text: text.clone(),
                        },
                        next,
                    ));
                }
            }
        }
    }
    if !state.back_stack.is_empty() {
        out.push((SimMove::Back, go_back(state)));
    }
    out
}

/// Shortest move sequence from `start` to a goal state, if any.
fn search(spec: &SimAppSpec, goal: &GoalPredicate, start: &SimState) -> Option<Vec<PathStep>> {
    if check_goal(start, goal) {
        return Some(Vec::new());
    }
    let cap = start.back_stack.len() + spec.screens.len();
    let mut parent: HashMap<SimState, (SimState, PathStep)> = HashMap::new();
    let mut seen: HashSet<SimState> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(state) = queue.pop_front() {
        if seen.len() > STATE_BUDGET {
            log::warn!("oracle search exceeded {STATE_BUDGET} states; giving up");
            return None;
        }
        for (mv, next) in moves(spec, &state) {
            if next == state || next.back_stack.len() > cap || !seen.insert(next.clone()) {
                continue;
            }
            let step = PathStep {
                screen: state.current.clone(),
                trigger: mv,
            };
            parent.insert(next.clone(), (state.clone(), step));
            if check_goal(&next, goal) {
                let mut path = Vec::new();
                let mut cur = next;
                while let Some((prev, step)) = parent.remove(&cur) {
                    path.push(step);
                    cur = prev;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(next);
        }
    }
    None
}

/// Minimal move sequence from the initial state to a goal state.
pub fn oracle_shortest_path(
    spec: &SimAppSpec,
    goal: &GoalPredicate,
) -> Result<Vec<PathStep>, OracleError> {
    search(spec, goal, &SimState::initial(spec)).ok_or(OracleError::NoPath)
}

/// Memoized distance-to-goal queries for one (app, goal) pair.
#[derive(Debug)]
pub struct Oracle<'a> {
    spec: &'a SimAppSpec,
    goal: &'a GoalPredicate,
    memo: HashMap<SimState, Option<usize>>,
}

impl<'a> Oracle<'a> {
    pub fn new(spec: &'a SimAppSpec, goal: &'a GoalPredicate) -> Self {
        Self {
            spec,
            goal,
            memo: HashMap::new(),
        }
    }

    /// Length of the shortest path from `state`, `None` if unreachable.
    pub fn distance(&mut self, state: &SimState) -> Option<usize> {
        if let Some(d) = self.memo.get(state) {
            return *d;
        }
        let d = search(self.spec, self.goal, state).map(|p| p.len());
        self.memo.insert(state.clone(), d);
        d
    }

    /// True iff moving from `before` to `after` leaves every minimal path.
    pub fn is_erroneous(&mut self, before: &SimState, after: &SimState) -> bool {
        match (self.distance(before), self.distance(after)) {
            (Some(a), Some(b)) => b + 1 != a,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

/// Ground-truth labels for a trace's actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLabels {
    /// One entry per action, Terminate included (never erroneous).
    pub erroneous: Vec<bool>,
    pub shortest_len: usize,
}

/// Replays `actions` from the initial state and labels each one.
///
/// Ids are resolved against the refined capture of the state they were taken
/// in, exactly as the agent did. Actions the simulator rejects leave the
/// state unchanged.
pub fn label_trace(
    spec: &SimAppSpec,
    goal: &GoalPredicate,
    actions: &[Action],
) -> Result<OracleLabels, OracleError> {
    let shortest_len = oracle_shortest_path(spec, goal)?.len();
    let mut oracle = Oracle::new(spec, goal);
    let mut state = SimState::initial(spec);
    let mut erroneous = Vec::with_capacity(actions.len());
    for act in actions {
        if *act == Action::Terminate {
            erroneous.push(false);
            continue;
        }
        let next = step(spec, &state, act)?;
        erroneous.push(oracle.is_erroneous(&state, &next));
        state = next;
    }
    Ok(OracleLabels {
        erroneous,
        shortest_len,
    })
}

fn step(spec: &SimAppSpec, state: &SimState, act: &Action) -> Result<SimState, OracleError> {
    let screen = refine_source(&sim_capture(state, spec))
        .map_err(|e| OracleError::Unmatched(e.to_string()))?;
    let id = match act {
        Action::Tap { id } | Action::InputText { id, .. } => *id as i64,
        Action::Back => screen.back_id() as i64,
        _ => return Ok(state.clone()),
    };
    let loc = resolve_locator(&screen, id).map_err(|e| OracleError::Unmatched(e.to_string()))?;
    Ok(sim_execute(state, spec, &loc, act).unwrap_or_else(|_| state.clone()))
}

/// Turns a path into refined-screen actions, one per move.
pub fn actions_for_path(spec: &SimAppSpec, path: &[PathStep]) -> Result<Vec<Action>, OracleError> {
    let mut state = SimState::initial(spec);
    let mut out = Vec::with_capacity(path.len());
    for ps in path {
        let screen = refine_source(&sim_capture(&state, spec))
            .map_err(|e| OracleError::Unmatched(e.to_string()))?;
        let find = |label: &str| {
            screen
                .elements
                .iter()
                .find(|e| !e.kind.is_synthetic() && e.label == label)
                .map(|e| e.id)
                .ok_or_else(|| OracleError::Unmatched(format!("`{label}` on `{}`", ps.screen)))
        };
        let act = match &ps.trigger {
            SimMove::Tap { label } => Action::Tap { id: find(label)? },
            SimMove::Input { label, text } => Action::InputText {
                id: find(label)?,
                text: text.clone(),
            },
            SimMove::Back => Action::Back,
        };
        state = step(spec, &state, &act)?;
        out.push(act);
    }
    Ok(out)
}

/// Replay script that walks `path` and then terminates.
pub fn script_for_path(spec: &SimAppSpec, path: &[PathStep]) -> Result<ReplayScript, OracleError> {
    let mut state = SimState::initial(spec);
    let mut responses = Vec::with_capacity(path.len() + 1);
    for act in actions_for_path(spec, path)? {
        let screen = refine_source(&sim_capture(&state, spec))
            .map_err(|e| OracleError::Unmatched(e.to_string()))?;
        let decision = match &act {
            Action::Tap { id } => Decision::new_action(*id as i64, None),
            Action::InputText { id, text } => Decision::new_action(*id as i64, Some(text)),
            _ => Decision::new_action(screen.back_id() as i64, None),
        };
        responses.push(decision.to_canonical_json());
        state = step(spec, &state, &act)?;
    }
    responses.push(Decision::new_termination().to_canonical_json());
    Ok(ReplayScript::sequential(responses))
}
