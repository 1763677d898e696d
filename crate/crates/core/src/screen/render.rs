use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::{ElementKind, RefinedScreen};

/// Renders the screen as the text block embedded in prompts.
///
/// One line per element, `[<id>] <kind> "<label>"` plus markers, followed by
/// one `- <text>` line per context line. Lines are joined with `\n` and there
/// is no trailing newline.
pub fn render(screen: &RefinedScreen) -> String {
    let mut out = String::new();
    for el in &screen.elements {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "[{}] {} \"{}\"", el.id, el.kind.render_name(), quote(&el.label));
        if el.kind == ElementKind::Input {
            out.push_str(" (accepts text)");
        }
        if let Some(v) = &el.value {
            let _ = write!(out, " value \"{}\"", quote(v));
        }
        match el.checked {
            Some(true) => out.push_str(" (checked)"),
            Some(false) => out.push_str(" (unchecked)"),
            None => {}
        }
        if !el.enabled {
            out.push_str(" (disabled)");
        }
    }
    for line in &screen.context_lines {
        out.push_str("\n- ");
        out.push_str(line);
    }
    out
}

fn quote(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// First 16 hex digits of the SHA-256 of the rendered text.
pub fn screen_hash(rendered: &str) -> String {
    let digest = Sha256::digest(rendered.as_bytes());
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screen::{parse_screen, refine, RawScreen, RefineOptions, TableLabeler};

    fn screen(xml: &str) -> RefinedScreen {
        let root = parse_screen(&RawScreen::new(xml, "t")).unwrap();
        refine(&root, &TableLabeler::default(), &RefineOptions::default())
    }

    #[test]
    fn back_only() {
        assert_eq!(render(&screen("<hierarchy/>")), "[0] back \"Back\"");
    }

    #[test]
    fn markers() {
        let s = screen(
            r#"<hierarchy>
                <node class="android.widget.EditText" hint="Name" text="Bob"/>
                <node class="android.widget.CheckBox" text="Remember &quot;me&quot;" checkable="true" checked="false"/>
                <node class="android.widget.Button" text="Go" clickable="true" enabled="false"/>
                <node class="android.widget.TextView" text="Hello"/>
            </hierarchy>"#,
        );
        assert_eq!(
            render(&s),
            "[0] input \"Name\" (accepts text) value \"Bob\"\n\
             [1] check \"Remember \\\"me\\\"\" (unchecked)\n\
             [2] tap \"Go\" (disabled)\n\
             [3] back \"Back\"\n\
             - Hello"
        );
    }

    #[test]
    fn hash_tracks_render() {
        let a = screen("<hierarchy><node text=\"A\"/></hierarchy>");
        let b = screen("<hierarchy><node text=\"B\"/></hierarchy>");
        let a2 = screen("<hierarchy><node text=\"A\" bounds=\"[0,0][1,1]\"/></hierarchy>");
        assert_ne!(a.screen_hash, b.screen_hash);
        assert_eq!(a.screen_hash, a2.screen_hash);
        assert_eq!(a.screen_hash.len(), 16);
    }
}
