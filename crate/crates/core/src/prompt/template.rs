use crate::agent::ActionRecord;
use crate::Action;

/// Instruction block placed at the top of every step prompt.
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_template_v1.txt");
pub const PROMPT_TEMPLATE_VERSION: u32 = 1;

pub const SECTION_SCREEN: &str = "Current Screen:";
pub const SECTION_GOAL: &str = "Overall Goal:";
pub const SECTION_PAST_ACTIONS: &str = "Past Actions:";

/// Inputs of one step prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptContext {
    /// Test case description.
    pub goal: String,
    /// Canonical history lines, numbered from 1.
    pub past_actions: Vec<String>,
    /// Rendered refined screen.
    pub screen_text: String,
}

/// Assembles the prompt:
///
/// ```text
/// <instruction block>
/// Current Screen:
/// <screen lines>
/// Overall Goal: <goal>
/// Past Actions:
/// <history lines | None>
/// ```
pub fn build_prompt(ctx: &PromptContext) -> String {
    let mut out = String::with_capacity(PROMPT_TEMPLATE.len() + ctx.screen_text.len() + 256);
    out.push_str(PROMPT_TEMPLATE);
    out.push_str(SECTION_SCREEN);
    out.push('\n');
    out.push_str(&ctx.screen_text);
    out.push('\n');
    out.push_str(SECTION_GOAL);
    out.push(' ');
    out.push_str(&ctx.goal);
    out.push('\n');
    out.push_str(SECTION_PAST_ACTIONS);
    out.push('\n');
    if ctx.past_actions.is_empty() {
        out.push_str("None\n");
    } else {
        for line in &ctx.past_actions {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Prompt re-sent after an unusable answer.
pub fn retry_prompt(prompt: &str, error: &str) -> String {
    format!("{prompt}Previous output was invalid:\n{error}\n")
}

/// Canonical `Past Actions` line for one executed step.
pub fn render_history_line(step: u32, record: &ActionRecord) -> String {
    let label = &record.element_label;
    match &record.action {
        Action::Tap { id } => format!("Step {step}: tapped '{label}' (id={id})"),
        Action::InputText { id, text } => {
            format!("Step {step}: entered text '{text}' into '{label}' (id={id})")
        }
        Action::Back => format!("Step {step}: pressed Back"),
        Action::ScrollUp => format!("Step {step}: scrolled up"),
        Action::ScrollDown => format!("Step {step}: scrolled down"),
        Action::Terminate => format!("Step {step}: finished"),
    }
}
