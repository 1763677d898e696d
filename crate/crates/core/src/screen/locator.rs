use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ElementKind, RefinedScreen, ScreenError};

/// How a device backend finds the element behind a refined id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "value", rename_all = "snake_case")]
pub enum Locator {
    /// `resource-id` attribute that is unique in the tree.
    ResourceId(String),
    /// Child-index path from the root.
    Path(Vec<usize>),
    NavBack,
    ScrollUp,
    ScrollDown,
}

impl Locator {
    /// XPath for a path locator: `/*[1]` is the root, then 1-based child steps.
    pub fn xpath(path: &[usize]) -> String {
        let mut out = String::from("/*[1]");
        for i in path {
            out.push_str(&format!("/*[{}]", i + 1));
        }
        out
    }
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locator::ResourceId(id) => write!(f, "id={id}"),
            Locator::Path(p) => f.write_str(&Locator::xpath(p)),
            Locator::NavBack => f.write_str("nav:back"),
            Locator::ScrollUp => f.write_str("nav:scroll-up"),
            Locator::ScrollDown => f.write_str("nav:scroll-down"),
        }
    }
}

/// Maps a refined element id to a locator.
///
/// Source-backed elements prefer a unique `resource-id`; otherwise the
/// absolute child-index path is used.
pub fn resolve_locator(screen: &RefinedScreen, id: i64) -> Result<Locator, ScreenError> {
    let el = screen.element(id).ok_or(ScreenError::UnknownElement(id))?;
    match el.kind {
        ElementKind::SyntheticBack => return Ok(Locator::NavBack),
        ElementKind::SyntheticScrollUp => return Ok(Locator::ScrollUp),
        ElementKind::SyntheticScrollDown => return Ok(Locator::ScrollDown),
        _ => {}
    }
    let node = screen
        .tree
        .at_path(&el.source_path)
        .ok_or(ScreenError::UnknownElement(id))?;
    let rid = node.attr_or_empty("resource-id");
    if !rid.is_empty() {
        let count = screen
            .tree
            .iter()
            .filter(|n| n.attr("resource-id") == Some(rid))
            .count();
        if count == 1 {
            return Ok(Locator::ResourceId(rid.to_string()));
        }
    }
    Ok(Locator::Path(el.source_path.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screen::{parse_screen, refine, RawScreen, RefineOptions, TableLabeler};

    fn screen(xml: &str) -> RefinedScreen {
        let root = parse_screen(&RawScreen::new(xml, "t")).unwrap();
        refine(&root, &TableLabeler::default(), &RefineOptions::default())
    }

    const XML: &str = r#"<hierarchy><node class="android.widget.FrameLayout">
        <node class="android.widget.Button" text="Login" clickable="true" resource-id="app:id/btn_login"/>
        <node class="android.widget.Button" text="A" clickable="true" resource-id="app:id/dup"/>
        <node class="android.widget.Button" text="B" clickable="true" resource-id="app:id/dup"/>
        <node class="android.widget.Button" text="C" clickable="true"/>
    </node></hierarchy>"#;

    #[test]
    fn unique_resource_id_wins() {
        let s = screen(XML);
        assert_eq!(
            resolve_locator(&s, 0).unwrap(),
            Locator::ResourceId("app:id/btn_login".into())
        );
    }

    #[test]
    fn duplicate_or_missing_resource_id_uses_path() {
        let s = screen(XML);
        assert_eq!(resolve_locator(&s, 1).unwrap(), Locator::Path(vec![0, 1]));
        assert_eq!(resolve_locator(&s, 3).unwrap(), Locator::Path(vec![0, 3]));
        assert_eq!(Locator::xpath(&[0, 3]), "/*[1]/*[1]/*[4]");
    }

    #[test]
    fn synthetic_and_unknown() {
        let s = screen(XML);
        assert_eq!(resolve_locator(&s, s.back_id() as i64).unwrap(), Locator::NavBack);
        assert_eq!(resolve_locator(&s, 99), Err(ScreenError::UnknownElement(99)));
        assert_eq!(resolve_locator(&s, -1), Err(ScreenError::UnknownElement(-1)));
    }
}
