//! Shared helpers for integration tests: fixture loading, generated UI
//! trees with an independent count oracle, and a request-logging WebDriver
//! stub.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use nlgui_core::agent::TestCase;
use nlgui_core::Action;
use nlgui_core::device::sim::{load_spec_file, GoalPredicate, SimAppSpec};
use proptest::prelude::*;
use serde_json::{json, Value};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn app(name: &str) -> Arc<SimAppSpec> {
    Arc::new(load_spec_file(&fixture_dir().join(format!("apps/{name}.json"))).unwrap())
}

/// Sim fixtures with a test description, a goal and the shortest path
/// length worked out by hand from each app's adjacency list.
pub struct SimFixture {
    pub app: &'static str,
    pub description: &'static str,
    pub goal: Value,
    pub shortest: usize,
}

pub fn sim_fixtures() -> Vec<SimFixture> {
    vec![
        SimFixture {
            app: "contacts",
            description: "Delete Contact X and confirm the deletion",
            goal: json!({"conditions": [{"variable": "contact_X", "equals": "deleted"}]}),
            shortest: 3,
        },
        SimFixture {
            app: "login",
            description: "Log in with user name alice and password s3cret",
            goal: json!({"conditions": [
                {"variable": "username", "equals": "alice"},
                {"variable": "password", "equals": "s3cret"},
                {"screen_is": "home"}
            ]}),
            shortest: 3,
        },
        SimFixture {
            app: "settings",
            description: "Turn on the dark theme in the Display settings",
            goal: json!({"conditions": [{"variable": "dark_mode", "equals": "true"}]}),
            shortest: 2,
        },
        SimFixture {
            app: "decoy",
            description: "Add a contact named Dana and save it",
            goal: json!({"conditions": [
                {"variable": "name", "equals": "Dana"},
                {"variable": "saved", "equals": "yes"}
            ]}),
            shortest: 4,
        },
        SimFixture {
            app: "notes",
            description: "Create a note titled Trip and tap Done to save it",
            goal: json!({"conditions": [
                {"variable": "title", "equals": "Trip"},
                {"variable": "note_created", "equals": "yes"}
            ]}),
            shortest: 3,
        },
        SimFixture {
            app: "about",
            description: "Check that onboarding is already finished",
            goal: json!({"conditions": [{"variable": "onboarded", "equals": "yes"}]}),
            shortest: 0,
        },
    ]
}

impl SimFixture {
    pub fn goal(&self) -> GoalPredicate {
        serde_json::from_value(self.goal.clone()).unwrap()
    }

    pub fn test_case(&self) -> TestCase {
        let mut t = TestCase::new(
            self.app,
            self.description,
            fixture_dir().join(format!("apps/{}.json", self.app)).display().to_string(),
        );
        t.goal = Some(self.goal());
        t
    }
}

// ---------------------------------------------------------------------------
// Generated UI trees

/// A generated node. `parent` is reduced modulo the node's index, so node 0
/// is the root and every other node hangs below an earlier one.
#[derive(Debug, Clone)]
pub struct GenNode {
    pub parent: usize,
    pub class: &'static str,
    pub clickable: bool,
    pub checkable: bool,
    pub scrollable: bool,
    pub text: String,
    pub desc: String,
}

pub const CLASSES: [&str; 9] = [
    "android.widget.FrameLayout",
    "android.widget.LinearLayout",
    "android.widget.TextView",
    "android.widget.Button",
    "android.widget.EditText",
    "android.widget.AutoCompleteTextView",
    "android.widget.ImageView",
    "android.widget.CheckBox",
    "android.view.View",
];

fn gen_node() -> impl Strategy<Value = GenNode> {
    (
        any::<usize>(),
        0..CLASSES.len(),
        prop::bool::weighted(0.25),
        prop::bool::weighted(0.1),
        prop::bool::weighted(0.03),
        prop::sample::select(vec!["", "", "OK", "Name", "Settings", "a & b", "<x>", "  spaced  out ", "\"q\""]),
        prop::sample::select(vec!["", "", "", "Search", "More options"]),
    )
        .prop_map(|(parent, class, clickable, checkable, scrollable, text, desc)| GenNode {
            parent,
            class: CLASSES[class],
            clickable,
            checkable,
            scrollable,
            text: text.to_string(),
            desc: desc.to_string(),
        })
}

pub fn gen_tree(max_nodes: usize) -> impl Strategy<Value = Vec<GenNode>> {
    prop::collection::vec(gen_node(), 1..=max_nodes).prop_map(|mut nodes| {
        for (i, n) in nodes.iter_mut().enumerate() {
            n.parent = if i == 0 { 0 } else { n.parent % i };
        }
        nodes
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Serializes the generated nodes as a `<hierarchy>` document.
pub fn tree_xml(nodes: &[GenNode]) -> String {
    let mut children = vec![Vec::new(); nodes.len()];
    for i in 1..nodes.len() {
        children[nodes[i].parent].push(i);
    }
    fn write(i: usize, nodes: &[GenNode], children: &[Vec<usize>], out: &mut String) {
        let n = &nodes[i];
        out.push_str(&format!(
            "<node class=\"{}\" text=\"{}\" content-desc=\"{}\" clickable=\"{}\" checkable=\"{}\" scrollable=\"{}\" index=\"{}\">",
            n.class,
            esc(&n.text),
            esc(&n.desc),
            n.clickable,
            n.checkable,
            n.scrollable,
            i
        ));
        for &c in &children[i] {
            write(c, nodes, children, out);
        }
        out.push_str("</node>");
    }
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?><hierarchy rotation=\"0\">");
    write(0, nodes, &children, &mut out);
    out.push_str("</hierarchy>");
    out
}

/// Nodes satisfying the interactivity predicate, counted from the generator's
/// own data rather than from the parser.
pub fn expected_interactive(nodes: &[GenNode]) -> usize {
    nodes
        .iter()
        .filter(|n| {
            n.clickable
                || n.checkable
                || n.class.ends_with("EditText")
                || n.class.ends_with("AutoCompleteTextView")
        })
        .count()
}

pub fn expected_editable(nodes: &[GenNode]) -> usize {
    nodes
        .iter()
        .filter(|n| n.class.ends_with("EditText") || n.class.ends_with("AutoCompleteTextView"))
        .count()
}

pub fn any_scrollable(nodes: &[GenNode]) -> bool {
    nodes.iter().any(|n| n.scrollable)
}

// ---------------------------------------------------------------------------
// WebDriver stub

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedRequest {
    pub method: String,
    pub path: String,
    pub body: Value,
}

pub struct WdStub {
    pub url: String,
    pub log: Arc<Mutex<Vec<LoggedRequest>>>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

pub const STUB_SESSION: &str = "abc";
pub const STUB_SOURCE: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<hierarchy rotation=\"0\"><node class=\"android.widget.Button\" text=\"Login\" clickable=\"true\" resource-id=\"btn_login\"/></hierarchy>";

fn respond(method: &str, path: &str, body: &Value) -> (u16, Value) {
    let session = format!("/session/{STUB_SESSION}");
    match (method, path) {
        ("POST", "/session") => (200, json!({"value": {"sessionId": STUB_SESSION, "capabilities": {}}})),
        ("GET", p) if p == format!("{session}/source") => (200, json!({"value": STUB_SOURCE})),
        ("POST", p) if p == format!("{session}/element") => {
            let wanted = body.get("value").and_then(Value::as_str).unwrap_or("");
            if wanted.contains("missing") {
                (404, json!({"value": {"error": "no such element", "message": "gone"}}))
            } else {
                (200, json!({"value": {"element-6066-11e4-a52e-4f735466cecf": "el-1"}}))
            }
        }
        ("DELETE", p) if p == session => (200, json!({"value": null})),
        (_, p) if p.starts_with(&session) => (200, json!({"value": null})),
        _ => (404, json!({"value": {"error": "invalid session id", "message": "unknown"}})),
    }
}

impl WdStub {
    pub fn start() -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let log = Arc::new(Mutex::new(Vec::new()));
        let (srv, lg) = (server.clone(), log.clone());
        let handle = std::thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                let mut text = String::new();
                let _ = req.as_reader().read_to_string(&mut text);
                let body: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
                let method = req.method().as_str().to_string();
                let path = req.url().to_string();
                let (status, reply) = respond(&method, &path, &body);
                lg.lock().unwrap().push(LoggedRequest { method, path, body });
                let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = req.respond(
                    tiny_http::Response::from_string(reply.to_string())
                        .with_status_code(status)
                        .with_header(header),
                );
            }
        });
        Self {
            url,
            log,
            server,
            handle: Some(handle),
        }
    }

    /// `METHOD path` of every request so far, session prefix stripped.
    pub fn calls(&self) -> Vec<String> {
        let prefix = format!("/session/{STUB_SESSION}");
        self.log
            .lock()
            .unwrap()
            .iter()
            .map(|r| {
                let p = r.path.strip_prefix(&prefix).unwrap_or(&r.path);
                format!("{} {}", r.method, if p.is_empty() { "/" } else { p })
            })
            .collect()
    }

    pub fn clear(&self) {
        self.log.lock().unwrap().clear();
    }
}

impl Drop for WdStub {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

// ---------------------------------------------------------------------------
// Prompt goldens

/// A (screen, goal, history) triple with a golden prompt file.
pub struct PromptTriple {
    pub screen: &'static str,
    pub goal: &'static str,
    pub history: Vec<(Action, &'static str)>,
}

pub fn prompt_triples() -> Vec<PromptTriple> {
    let login_goal = "Log in the application by entering user name and password";
    vec![
        PromptTriple {
            screen: "login",
            goal: login_goal,
            history: vec![],
        },
        PromptTriple {
            screen: "login",
            goal: login_goal,
            history: vec![(
                Action::InputText {
                    id: 2,
                    text: "alice@example.com".into(),
                },
                "Email",
            )],
        },
        PromptTriple {
            screen: "contact_detail",
            goal: "Delete the contact named Contact X",
            history: vec![(Action::Tap { id: 0 }, "Contact X")],
        },
        PromptTriple {
            screen: "settings_list",
            goal: "Disable email notifications from the Settings menu",
            history: vec![
                (Action::Tap { id: 3 }, "Apps"),
                (Action::Back, "Back"),
                (Action::ScrollDown, "Scroll down"),
            ],
        },
        PromptTriple {
            screen: "form",
            goal: "Fill in the form with name \"Bob\" and city Zürich, then submit",
            history: vec![
                (
                    Action::InputText {
                        id: 0,
                        text: "Bob".into(),
                    },
                    "Name",
                ),
                (Action::Tap { id: 1 }, "Remember me"),
            ],
        },
    ]
}

pub fn screen_xml(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(format!("screens/{name}.xml"))).unwrap()
}

/// Builds the prompt for a triple through the public API.
pub fn build_triple_prompt(t: &PromptTriple) -> String {
    use nlgui_core::agent::ActionRecord;
    use nlgui_core::prompt::{build_prompt, render_history_line, PromptContext};
    use nlgui_core::screen::{refine_source, RawScreen};

    let screen = refine_source(&RawScreen::new(screen_xml(t.screen), "file")).unwrap();
    let past_actions = t
        .history
        .iter()
        .enumerate()
        .map(|(i, (a, label))| {
            let step = i as u32 + 1;
            render_history_line(step, &ActionRecord::for_test(step, a.clone(), label))
        })
        .collect();
    build_prompt(&PromptContext {
        goal: t.goal.to_string(),
        past_actions,
        screen_text: screen.render(),
    })
}
