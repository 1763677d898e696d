//! Screen model: UI-hierarchy parsing and refinement.
//!
//! A [`RawScreen`] holds the XML dump captured from a device. [`parse_screen`]
//! turns it into a [`UiNode`] tree, [`refine`] reduces the tree to the
//! elements an agent can act on plus the text worth reading, and [`render`]
//! produces the exact text block that is embedded in prompts.

mod labeler;
mod locator;
mod parse;
mod refine;
mod render;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use labeler::{IconLabeler, TableLabeler, FALLBACK_ICON_LABEL};
pub use locator::{resolve_locator, Locator};
pub use parse::{parse_screen, to_xml};
pub use refine::{is_editable_class, is_image_class, is_interactive, refine, RefineOptions};
pub use render::{render, screen_hash};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScreenError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("document has no root element")]
    EmptyDocument,
    #[error("no element with id {0} on this screen")]
    UnknownElement(i64),
}

/// A UI-hierarchy document as delivered by a device backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawScreen {
    pub source: String,
    /// Milliseconds since the Unix epoch.
    pub captured_at: u64,
    pub backend_tag: String,
}

impl RawScreen {
    pub fn new(source: impl Into<String>, backend_tag: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            captured_at: crate::now_millis(),
            backend_tag: backend_tag.into(),
        }
    }
}

/// One element of the parsed hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UiNode {
    /// XML element name as it appeared in the document.
    pub tag: String,
    /// Widget class: the `class` attribute when present, else the tag.
    pub class_name: String,
    pub attributes: BTreeMap<String, String>,
    pub children: Vec<UiNode>,
    /// Pre-order position in the document, root = 0.
    pub doc_index: usize,
}

impl UiNode {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    /// Attribute value, treating a missing attribute as empty.
    pub fn attr_or_empty(&self, name: &str) -> &str {
        self.attr(name).unwrap_or("")
    }

    pub fn flag(&self, name: &str) -> bool {
        self.attr(name) == Some("true")
    }

    /// Follows a child-index path from this node.
    pub fn at_path(&self, path: &[usize]) -> Option<&UiNode> {
        path.iter().try_fold(self, |node, &i| node.children.get(i))
    }

    /// Number of nodes in the subtree, including this one.
    pub fn subtree_len(&self) -> usize {
        1 + self.children.iter().map(UiNode::subtree_len).sum::<usize>()
    }

    /// Pre-order iterator over the subtree.
    pub fn iter(&self) -> impl Iterator<Item = &UiNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Tap,
    Input,
    Check,
    SyntheticBack,
    SyntheticScrollUp,
    SyntheticScrollDown,
}

impl ElementKind {
    pub fn is_synthetic(self) -> bool {
        matches!(
            self,
            ElementKind::SyntheticBack
                | ElementKind::SyntheticScrollUp
                | ElementKind::SyntheticScrollDown
        )
    }

    /// Word used in the rendered screen line.
    pub fn render_name(self) -> &'static str {
        match self {
            ElementKind::Tap => "tap",
            ElementKind::Input => "input",
            ElementKind::Check => "check",
            ElementKind::SyntheticBack => "back",
            ElementKind::SyntheticScrollUp => "scroll-up",
            ElementKind::SyntheticScrollDown => "scroll-down",
        }
    }
}

/// An element the agent can address by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedElement {
    pub id: u32,
    pub kind: ElementKind,
    pub label: String,
    /// Child-index path from the root; empty for synthetic controls.
    pub source_path: Vec<usize>,
    pub input_capable: bool,
    pub enabled: bool,
    /// Checked state for `check` elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checked: Option<bool>,
    /// Current text of an input field when it differs from its label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl RefinedElement {
    pub(crate) fn synthetic(id: u32, kind: ElementKind, label: &str) -> Self {
        Self {
            id,
            kind,
            label: label.to_string(),
            source_path: Vec::new(),
            input_capable: false,
            enabled: true,
            checked: None,
            value: None,
        }
    }
}

/// The compact screen representation the agent reasons over.
#[derive(Debug, Clone, Serialize)]
pub struct RefinedScreen {
    pub elements: Vec<RefinedElement>,
    pub context_lines: Vec<String>,
    pub screen_hash: String,
    #[serde(skip)]
    pub origin: Option<Arc<RawScreen>>,
    #[serde(skip)]
    pub tree: Arc<UiNode>,
}

impl RefinedScreen {
    pub fn element(&self, id: i64) -> Option<&RefinedElement> {
        usize::try_from(id).ok().and_then(|i| self.elements.get(i))
    }

    pub fn back_id(&self) -> u32 {
        self.elements
            .iter()
            .find(|e| e.kind == ElementKind::SyntheticBack)
            .map(|e| e.id)
            .expect("refined screen always carries a Back element")
    }

    pub fn render(&self) -> String {
        render(self)
    }
}

impl PartialEq for RefinedScreen {
    fn eq(&self, other: &Self) -> bool {
        self.elements == other.elements && self.context_lines == other.context_lines
    }
}

/// Parse and refine in one go with the default labeler.
pub fn refine_source(raw: &RawScreen) -> Result<RefinedScreen, ScreenError> {
    let root = parse_screen(raw)?;
    let mut screen = refine(&root, &TableLabeler::default(), &RefineOptions::default());
    screen.origin = Some(Arc::new(raw.clone()));
    Ok(screen)
}
