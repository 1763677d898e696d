use std::collections::BTreeMap;

use super::UiNode;

/// Label used when nothing better is known about an icon.
pub const FALLBACK_ICON_LABEL: &str = "icon";

/// Turns an image node into a short textual label.
///
/// The default [`TableLabeler`] is a lookup table; an image classifier can be
/// plugged in by implementing this trait.
pub trait IconLabeler: Send + Sync {
    fn label_icon(&self, node: &UiNode) -> String;
}

const BUNDLED_TABLE: &[(&str, &str)] = &[
    ("ic_add", "Add"),
    ("ic_arrow_back", "Navigate up"),
    ("ic_back", "Navigate up"),
    ("ic_call", "Call"),
    ("ic_camera", "Camera"),
    ("ic_check", "Done"),
    ("ic_close", "Close"),
    ("ic_delete", "Delete"),
    ("ic_done", "Done"),
    ("ic_edit", "Edit"),
    ("ic_email", "Email"),
    ("ic_favorite", "Favorite"),
    ("ic_home", "Home"),
    ("ic_info", "Info"),
    ("ic_mail", "Email"),
    ("ic_menu", "Menu"),
    ("ic_more_vert", "More options"),
    ("ic_person", "Profile"),
    ("ic_refresh", "Refresh"),
    ("ic_save", "Save"),
    ("ic_search", "Search"),
    ("ic_send", "Send"),
    ("ic_settings", "Settings"),
    ("ic_share", "Share"),
    ("ic_star", "Star"),
];

/// content-desc, then the resource-id suffix looked up in a name table, then
/// [`FALLBACK_ICON_LABEL`].
#[derive(Debug, Clone)]
pub struct TableLabeler {
    table: BTreeMap<String, String>,
}

impl Default for TableLabeler {
    fn default() -> Self {
        Self::with_table(
            BUNDLED_TABLE
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string())),
        )
    }
}

impl TableLabeler {
    pub fn with_table(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            table: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, label: impl Into<String>) {
        self.table.insert(name.into(), label.into());
    }
}

impl IconLabeler for TableLabeler {
    fn label_icon(&self, node: &UiNode) -> String {
        let desc = node.attr_or_empty("content-desc").trim();
        if !desc.is_empty() {
            return desc.to_string();
        }
        let rid = node.attr_or_empty("resource-id");
        let suffix = rid.rsplit('/').next().unwrap_or("");
        if let Some(label) = self.table.get(suffix) {
            return label.clone();
        }
        FALLBACK_ICON_LABEL.to_string()
    }
}
