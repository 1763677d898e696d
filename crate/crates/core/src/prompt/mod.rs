//! The structured step prompt and the JSON decision the model answers with.

mod decision;
mod template;

pub use decision::{
    extract_json_object, parse_decision, validate_decision, Decision, DecisionError, ScreenAction,
    SelectedAction, ValidatedAction, DECISION_KEYS, NO_VALUE,
};
pub use template::{
    build_prompt, render_history_line, retry_prompt, PromptContext, PROMPT_TEMPLATE,
    PROMPT_TEMPLATE_VERSION, SECTION_GOAL, SECTION_PAST_ACTIONS, SECTION_SCREEN,
};
