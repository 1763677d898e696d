//! Advisory checks on test descriptions.

use serde::{Deserialize, Serialize};

use crate::agent::TestCase;

const MUTATION_VERBS: [&str; 6] = ["set", "change", "update", "add", "delete", "edit"];
const CONFIRMATION_WORDS: [&str; 4] = ["save", "done", "confirm", "ok"];
const LOCATION_CUES: [&str; 3] = ["in", "under", "from"];
const MIN_WORDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintKind {
    MissingConfirmation,
    TooVague,
    MissingPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub kind: LintKind,
    pub message: String,
    pub hint: String,
}

pub fn lint_description(t: &TestCase) -> Vec<LintFinding> {
    lint_text(&t.description)
}

pub fn lint_text(description: &str) -> Vec<LintFinding> {
    let words: Vec<String> = description
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let has = |set: &[&str]| words.iter().any(|w| set.contains(&w.as_str()));
    let mut out = Vec::new();
    if has(&MUTATION_VERBS) && !has(&CONFIRMATION_WORDS) {
        out.push(LintFinding {
            kind: LintKind::MissingConfirmation,
            message: "the description changes something but never says how to commit it".into(),
            hint: format!("end with the confirming step, e.g. \"{}. Click Done to save\"", description.trim_end_matches('.')),
        });
    }
    if words.len() < MIN_WORDS {
        out.push(LintFinding {
            kind: LintKind::TooVague,
            message: format!("only {} word(s)", words.len()),
            hint: "say which screen to start from and what the end state should be".into(),
        });
    }
    if words.iter().any(|w| w == "settings") && !has(&LOCATION_CUES) {
        out.push(LintFinding {
            kind: LintKind::MissingPath,
            message: "mentions settings without saying where they are".into(),
            hint: "name the menu that holds them, e.g. \"from the Settings menu\" or \"under Notifications\"".into(),
        });
    }
    out
}
