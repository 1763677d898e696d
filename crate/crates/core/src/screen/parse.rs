use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;

use super::{RawScreen, ScreenError, UiNode};

/// Parses a UI-hierarchy dump into a node tree.
///
/// Attributes are kept verbatim and `doc_index` follows pre-order. Both the
/// uiautomator dialect (`<node class="...">`) and the Appium dialect (elements
/// named after the widget class) are accepted.
pub fn parse_screen(raw: &RawScreen) -> Result<UiNode, ScreenError> {
    if raw.source.trim().is_empty() {
        return Err(ScreenError::EmptyDocument);
    }
    let doc = roxmltree::Document::parse(&raw.source).map_err(|e| match e {
        roxmltree::Error::NoRootNode => ScreenError::EmptyDocument,
        other => ScreenError::MalformedXml(other.to_string()),
    })?;
    let mut next_index = 0;
    Ok(build(doc.root_element(), &mut next_index))
}

fn build(node: roxmltree::Node<'_, '_>, next_index: &mut usize) -> UiNode {
    let doc_index = *next_index;
    *next_index += 1;
    let attributes: BTreeMap<String, String> = node
        .attributes()
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect();
    let tag = node.tag_name().name().to_string();
    let class_name = attributes.get("class").cloned().unwrap_or_else(|| tag.clone());
    let children = node
        .children()
        .filter(|c| c.is_element())
        .map(|c| build(c, next_index))
        .collect();
    UiNode {
        tag,
        class_name,
        attributes,
        children,
        doc_index,
    }
}

/// Serializes a tree back to XML (attributes in name order, two-space indent).
pub fn to_xml(root: &UiNode) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_node(root, 0, &mut out);
    out
}

fn write_node(node: &UiNode, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push('<');
    out.push_str(&node.tag);
    for (k, v) in &node.attributes {
        let _ = write!(out, " {}=\"{}\"", k, escape(v.as_str()));
    }
    if node.children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for child in &node.children {
        write_node(child, depth + 1, out);
    }
    for _ in 0..depth {
        out.push_str("  ");
    }
    let _ = writeln!(out, "</{}>", node.tag);
}
