use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::metrics::{compute_metrics, ReportMeta, SuiteReport};
use crate::agent::{
    run_sim_test, run_test_case, trace_file_name, write_trace, AgentConfig, ExecutionTrace,
    TestCase, Verdict,
};
use crate::device::sim::{label_trace, load_spec_file, OracleLabels, SimAppSpec};
use crate::device::webdriver::open_session;
use crate::llm::{HttpBackend, LlmBackend, RecorderSink, ReplayBackend, ReplayScript};
use crate::now_millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Sim,
    Webdriver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmConfig {
    /// One replay script per test: `<scripts_dir>/<test id>.jsonl`.
    Replay { scripts_dir: PathBuf },
    /// Chat-completions endpoint; the API key comes from [`RunOptions`].
    Http { endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub tests: Vec<TestCase>,
    pub backend: BackendKind,
    pub llm: LlmConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default = "default_technique")]
    pub technique: String,
    /// WebDriver server URL (webdriver backend only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub webdriver_url: Option<String>,
    /// Extra session capabilities; `appium:appPackage` is filled from each
    /// test's `app_binding`.
    #[serde(default)]
    pub capabilities: Map<String, Value>,
}

fn one() -> usize {
    1
}

fn default_technique() -> String {
    "nlgui".into()
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SuiteError {
    #[error("invalid suite: {0}")]
    Invalid(String),
}

impl SuiteSpec {
    pub fn load(path: &Path) -> Result<Self, SuiteError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SuiteError::Invalid(format!("{}: {e}", path.display())))?;
        let spec: SuiteSpec = serde_json::from_str(&text)
            .map_err(|e| SuiteError::Invalid(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SuiteError> {
        if self.tests.is_empty() {
            return Err(SuiteError::Invalid("no tests".into()));
        }
        if self.parallelism == 0 {
            return Err(SuiteError::Invalid("parallelism must be at least 1".into()));
        }
        self.agent.validate().map_err(SuiteError::Invalid)?;
        for t in &self.tests {
            t.validate().map_err(SuiteError::Invalid)?;
        }
        if self.backend == BackendKind::Webdriver && self.webdriver_url.is_none() {
            return Err(SuiteError::Invalid("webdriver backend needs webdriver_url".into()));
        }
        Ok(())
    }
}

/// Environment of one suite run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Relative paths in the suite (app specs, scripts) resolve against this.
    pub base_dir: PathBuf,
    /// Where trace and exchange files go; nothing is written when unset.
    pub output_dir: Option<PathBuf>,
    pub api_key: Option<String>,
    pub verdicts: BTreeMap<String, bool>,
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub traces: Vec<ExecutionTrace>,
    pub oracles: HashMap<String, OracleLabels>,
    pub report: SuiteReport,
}

fn failed(test: &TestCase, reason: String) -> ExecutionTrace {
    let now = now_millis();
    ExecutionTrace {
        test: test.clone(),
        records: Vec::new(),
        verdict: Verdict::BackendFailure(reason),
        started_at: now,
        ended_at: now,
        goal_satisfied: None,
    }
}

/// A finished test and, in sim mode, its oracle labels.
type Finished = (ExecutionTrace, Option<OracleLabels>);

struct Shared<'a> {
    spec: &'a SuiteSpec,
    opts: &'a RunOptions,
    apps: Mutex<HashMap<PathBuf, Result<Arc<SimAppSpec>, String>>>,
}

impl Shared<'_> {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.opts.base_dir.join(p)
        }
    }

    fn app(&self, binding: &str) -> Result<Arc<SimAppSpec>, String> {
        let path = self.resolve(Path::new(binding));
        let mut apps = self.apps.lock().expect("app cache lock");
        apps.entry(path.clone())
            .or_insert_with(|| load_spec_file(&path).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
    }

    fn llm(&self, test: &TestCase) -> Result<Box<dyn LlmBackend>, String> {
        match &self.spec.llm {
            LlmConfig::Replay { scripts_dir } => {
                let path = self.resolve(scripts_dir).join(format!("{}.jsonl", test.id));
                let script = ReplayScript::load(&path).map_err(|e| e.to_string())?;
                Ok(Box::new(ReplayBackend::new(script).map_err(|e| e.to_string())?))
            }
            LlmConfig::Http { endpoint } => Ok(Box::new(HttpBackend::new(
                endpoint.clone(),
                self.opts.api_key.clone(),
            ))),
        }
    }

    fn run_one(&self, test: &TestCase) -> Finished {
        let (trace, labels) = self.execute(test);
        if let Some(dir) = &self.opts.output_dir {
            if let Err(e) = write_trace(&dir.join(trace_file_name(trace.trace_id())), &trace) {
                log::error!("writing trace for `{}`: {e}", test.id);
            }
        }
        (trace, labels)
    }

    fn execute(&self, test: &TestCase) -> Finished {
        let llm = match self.llm(test) {
            Ok(l) => l,
            Err(e) => return (failed(test, format!("llm: {e}")), None),
        };
        let mut sink = match (&self.opts.output_dir, self.spec.agent.record_for_distillation) {
            (Some(dir), true) => {
                match RecorderSink::append_to(&dir.join(format!("exchanges-{}.jsonl", test.id))) {
                    Ok(s) => Some(s),
                    Err(e) => return (failed(test, format!("recorder: {e}")), None),
                }
            }
            _ => None,
        };
        let cfg = &self.spec.agent;
        let (trace, labels) = match self.spec.backend {
            BackendKind::Sim => {
                let app = match self.app(&test.app_binding) {
                    Ok(a) => a,
                    Err(e) => return (failed(test, format!("app spec: {e}")), None),
                };
                let trace = run_sim_test(test, app.clone(), llm.as_ref(), cfg, sink.as_mut());
                let labels = test.goal.as_ref().and_then(|g| {
                    label_trace(&app, g, &trace.actions())
                        .map_err(|e| log::info!("no oracle labels for `{}`: {e}", test.id))
                        .ok()
                });
                (trace, labels)
            }
            BackendKind::Webdriver => {
                let url = self.spec.webdriver_url.as_deref().unwrap_or_default();
                let mut caps = self.spec.capabilities.clone();
                caps.insert("appium:appPackage".into(), Value::String(test.app_binding.clone()));
                match open_session(url, &caps) {
                    Ok(mut session) => {
                        let trace = run_test_case(test, &mut session, llm.as_ref(), cfg, sink.as_mut());
                        (trace, None)
                    }
                    Err(e) => (failed(test, format!("session: {e}")), None),
                }
            }
        };
        (trace, labels)
    }
}

/// Runs every test, at most `parallelism` at a time, and scores the results.
///
/// A test that cannot even start (missing script, bad app spec, refused
/// session) gets a `BackendFailure` row; the rest of the suite carries on.
pub fn run_suite(spec: &SuiteSpec, opts: &RunOptions) -> Result<SuiteRun, SuiteError> {
    spec.validate()?;
    if let Some(dir) = &opts.output_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| SuiteError::Invalid(format!("{}: {e}", dir.display())))?;
    }
    let shared = Shared {
        spec,
        opts,
        apps: Mutex::new(HashMap::new()),
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Finished>>> = Mutex::new(vec![None; spec.tests.len()]);
    let workers = spec.parallelism.min(spec.tests.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(test) = spec.tests.get(i) else { break };
                let out = shared.run_one(test);
                results.lock().expect("results lock")[i] = Some(out);
            });
        }
    });
    let mut traces = Vec::with_capacity(spec.tests.len());
    let mut oracles = HashMap::new();
    for (trace, labels) in results.into_inner().expect("results lock").into_iter().flatten() {
        if let Some(l) = labels {
            oracles.insert(trace.trace_id().to_string(), l);
        }
        traces.push(trace);
    }
    let meta = ReportMeta {
        technique: spec.technique.clone(),
        model: spec.agent.model.clone(),
    };
    let report = compute_metrics(&traces, &opts.verdicts, &oracles, meta);
    Ok(SuiteRun {
        traces,
        oracles,
        report,
    })
}
