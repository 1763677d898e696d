use std::sync::Arc;

use super::labeler::FALLBACK_ICON_LABEL;
use super::{render, ElementKind, IconLabeler, RefinedElement, RefinedScreen, UiNode};

#[derive(Debug, Clone)]
pub struct RefineOptions {
    /// Class-name suffixes of widgets that accept text.
    pub editable_suffixes: Vec<String>,
    /// Class-name suffixes of image widgets routed through the icon labeler.
    pub image_suffixes: Vec<String>,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            editable_suffixes: vec!["EditText".into(), "AutoCompleteTextView".into()],
            image_suffixes: vec!["ImageView".into(), "ImageButton".into(), ".Image".into()],
        }
    }
}

pub fn is_editable_class(class_name: &str, opts: &RefineOptions) -> bool {
    opts.editable_suffixes.iter().any(|s| class_name.ends_with(s.as_str()))
}

pub fn is_image_class(class_name: &str, opts: &RefineOptions) -> bool {
    opts.image_suffixes.iter().any(|s| class_name.ends_with(s.as_str()))
}

/// clickable, checkable, or an editable widget class.
pub fn is_interactive(node: &UiNode, opts: &RefineOptions) -> bool {
    node.flag("clickable") || node.flag("checkable") || is_editable_class(&node.class_name, opts)
}

struct Walk<'a> {
    labeler: &'a dyn IconLabeler,
    opts: &'a RefineOptions,
    elements: Vec<RefinedElement>,
    context_lines: Vec<String>,
    any_scrollable: bool,
}

/// Reduces a parsed tree to its actionable elements and retained text.
///
/// Ids are dense and follow document order; synthetic scroll controls (only
/// when some node is scrollable) and Back are appended last, Back final.
/// Text and icon labels found below an interactive node name that node when it
/// has no label of its own; otherwise they become context lines.
pub fn refine(root: &UiNode, labeler: &dyn IconLabeler, opts: &RefineOptions) -> RefinedScreen {
    let mut walk = Walk {
        labeler,
        opts,
        elements: Vec::new(),
        context_lines: Vec::new(),
        any_scrollable: false,
    };
    let mut path = Vec::new();
    walk.visit(root, &mut path, None);

    let Walk {
        mut elements,
        context_lines,
        any_scrollable,
        ..
    } = walk;
    for el in &mut elements {
        if el.label.is_empty() {
            el.label = fallback_label(root.at_path(&el.source_path).expect("path from walk"));
        }
    }
    let mut next_id = elements.len() as u32;
    if any_scrollable {
        elements.push(RefinedElement::synthetic(
            next_id,
            ElementKind::SyntheticScrollUp,
            "Scroll up",
        ));
        elements.push(RefinedElement::synthetic(
            next_id + 1,
            ElementKind::SyntheticScrollDown,
            "Scroll down",
        ));
        next_id += 2;
    }
    elements.push(RefinedElement::synthetic(next_id, ElementKind::SyntheticBack, "Back"));

    let mut screen = RefinedScreen {
        elements,
        context_lines,
        screen_hash: String::new(),
        origin: None,
        tree: Arc::new(root.clone()),
    };
    screen.screen_hash = super::screen_hash(&render(&screen));
    screen
}

impl Walk<'_> {
    fn visit(&mut self, node: &UiNode, path: &mut Vec<usize>, enclosing: Option<usize>) {
        if node.flag("scrollable") {
            self.any_scrollable = true;
        }
        let text = clean(node.attr_or_empty("text"));
        let desc = clean(node.attr_or_empty("content-desc"));
        let image = is_image_class(&node.class_name, self.opts);

        let mut enclosing_here = enclosing;
        if is_interactive(node, self.opts) {
            let editable = is_editable_class(&node.class_name, self.opts);
            let kind = if editable {
                ElementKind::Input
            } else if node.flag("checkable") {
                ElementKind::Check
            } else {
                ElementKind::Tap
            };
            let mut value = None;
            let label = if editable {
                let hint = clean(node.attr_or_empty("hint"));
                let named = first_non_empty([hint, desc]);
                match named {
                    Some(name) => {
                        if !text.is_empty() && text != name {
                            value = Some(text);
                        }
                        name
                    }
                    None => text,
                }
            } else if !text.is_empty() {
                text
            } else if image {
                let icon = self.labeler.label_icon(node);
                if icon == FALLBACK_ICON_LABEL && !desc.is_empty() {
                    desc
                } else {
                    icon
                }
            } else {
                desc
            };
            let checked = (kind == ElementKind::Check).then(|| node.flag("checked"));
            self.elements.push(RefinedElement {
                id: self.elements.len() as u32,
                kind,
                label,
                source_path: path.clone(),
                input_capable: kind == ElementKind::Input,
                enabled: node.attr("enabled") != Some("false"),
                checked,
                value,
            });
            enclosing_here = Some(self.elements.len() - 1);
        } else if image && text.is_empty() {
            let icon = self.labeler.label_icon(node);
            self.attach_or_context(enclosing, icon, icon_is_informative);
        } else if let Some(t) = first_non_empty([text, desc]) {
            self.attach_or_context(enclosing, t, |_| true);
        }

        for (i, child) in node.children.iter().enumerate() {
            path.push(i);
            self.visit(child, path, enclosing_here);
            path.pop();
        }
    }

    fn attach_or_context(
        &mut self,
        enclosing: Option<usize>,
        label: String,
        keep_as_context: fn(&str) -> bool,
    ) {
        if let Some(idx) = enclosing {
            let el = &mut self.elements[idx];
            if el.label.is_empty() {
                el.label = label;
                return;
            }
        }
        if keep_as_context(&label) {
            self.context_lines.push(label);
        }
    }
}

fn icon_is_informative(label: &str) -> bool {
    label != FALLBACK_ICON_LABEL
}

fn first_non_empty<const N: usize>(candidates: [String; N]) -> Option<String> {
    candidates.into_iter().find(|s| !s.is_empty())
}

/// Collapses whitespace runs (including newlines) to single spaces.
fn clean(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fallback_label(node: &UiNode) -> String {
    let rid = node.attr_or_empty("resource-id");
    let suffix = rid.rsplit('/').next().unwrap_or("").trim();
    if !suffix.is_empty() {
        return suffix.to_string();
    }
    node.class_name
        .rsplit('.')
        .next()
        .filter(|s| !s.is_empty())
        .unwrap_or("element")
        .to_string()
}
