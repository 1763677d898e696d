//! `nlgui`: run natural-language GUI tests and score the results.
//!
//! Exit codes: 0 success, 1 bad input, 2 run finished without completing,
//! 3 device or LLM backend failure.

mod config;

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nlgui_core::agent::{
    read_trace, run_sim_test, run_test_case, trace_file_name, write_trace, ExecutionTrace,
    TestCase, Verdict,
};
use nlgui_core::device::sim::{label_trace, load_spec_file, OracleLabels};
use nlgui_core::device::webdriver::open_session;
use nlgui_core::eval::{
    compute_metrics, export_distill, lint_description, lint_text, load_verdicts, render_report,
    run_suite, save_verdicts, write_distill, FilterConfig, ReportMeta, RunOptions, SuiteSpec,
    Verdicts,
};
use nlgui_core::llm::{HttpBackend, LlmBackend, RecorderSink, ReplayBackend, ReplayScript};
use nlgui_core::screen::{refine_source, RawScreen};
use serde_json::Value;

use config::CliConfig;

const EXIT_INPUT: u8 = 1;
const EXIT_UNFINISHED: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "nlgui", version, about = "Run natural-language GUI tests with an LLM agent")]
struct Cli {
    /// JSON settings file. NLGUI_LLM_ENDPOINT, NLGUI_WEBDRIVER_URL and
    /// NLGUI_OUTPUT_DIR override it; the API key is only read from
    /// NLGUI_LLM_API_KEY.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the refined description of a UI-hierarchy dump.
    Refine {
        xml: PathBuf,
        /// Print the element list as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run one test case.
    Run(RunArgs),
    /// Run a suite file and write traces plus a report.
    Suite {
        suite: PathBuf,
        /// Human verdicts to score against (defaults to <output>/verdicts.json).
        #[arg(long)]
        verdicts: Option<PathBuf>,
    },
    /// Record human verdicts for completed runs.
    Verdict(VerdictArgs),
    /// Check test descriptions for common ambiguities.
    Lint {
        /// Test case files.
        tests: Vec<PathBuf>,
        /// Lint this description instead of files.
        #[arg(long)]
        text: Option<String>,
    },
    /// Export completed traces as prompt/completion pairs.
    Export {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long, default_value_t = 2.0)]
        inefficiency_factor: f64,
    },
    /// Score traces and print the results table and histogram.
    Report {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long, default_value = "nlgui")]
        technique: String,
        /// Model column; defaults to the configured agent model.
        #[arg(long)]
        model: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Sim,
    Webdriver,
}

#[derive(Args)]
struct RunArgs {
    test: PathBuf,
    #[arg(long, value_enum, default_value = "sim")]
    backend: Backend,
    /// Replay this script instead of calling the configured endpoint.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<u32>,
    /// Keep prompts and responses for distillation.
    #[arg(long)]
    record: bool,
}

#[derive(Args)]
struct VerdictArgs {
    /// Trace id to annotate.
    id: Option<String>,
    /// `pass` or `fail`.
    verdict: Option<String>,
    /// Merge verdicts from a JSON file mapping trace id to boolean.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Ask about every completed trace that has no verdict yet.
    #[arg(long)]
    interactive: bool,
    /// Verdict file to update (defaults to <output>/verdicts.json).
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Directory holding trace-*.jsonl files (defaults to the output dir).
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Base directory for simulator app specs named in the traces; used to
    /// label erroneous steps with the shortest-path oracle.
    #[arg(long)]
    apps: Option<PathBuf>,
}

/// Exit code paired with a message for stderr.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_INPUT, e.into())
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match CliConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let level = cli.log_level.clone().unwrap_or_else(|| cfg.log_level.clone());
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command, &cfg) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Command, cfg: &CliConfig) -> CmdResult {
    match cmd {
        Command::Refine { xml, json } => cmd_refine(&xml, json),
        Command::Run(args) => cmd_run(&args, cfg),
        Command::Suite { suite, verdicts } => cmd_suite(&suite, verdicts, cfg),
        Command::Verdict(args) => cmd_verdict(&args, cfg),
        Command::Lint { tests, text } => cmd_lint(&tests, text.as_deref()),
        Command::Export { traces, inefficiency_factor } => cmd_export(&traces, inefficiency_factor, cfg),
        Command::Report { traces, verdicts, technique, model } => {
            let model = model.unwrap_or_else(|| cfg.agent.model.clone());
            cmd_report(&traces, verdicts, ReportMeta { technique, model }, cfg)
        }
    }
}

fn cmd_refine(path: &Path, json: bool) -> CmdResult {
    let xml = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let screen = refine_source(&RawScreen::new(xml, "file"))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&screen)?);
    } else {
        print!("{}", screen.render());
        println!();
    }
    Ok(0)
}

fn relative_to(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn make_llm(script: Option<&Path>, cfg: &CliConfig) -> Result<Box<dyn LlmBackend>, Failure> {
    if let Some(path) = script {
        let script = ReplayScript::load(path)?;
        return Ok(Box::new(ReplayBackend::new(script)?));
    }
    let Some(endpoint) = &cfg.llm_endpoint else {
        return Err(Failure(
            EXIT_INPUT,
            anyhow::anyhow!("no LLM endpoint: pass --script or set {}", config::ENV_ENDPOINT),
        ));
    };
    Ok(Box::new(HttpBackend::new(endpoint.clone(), cfg.llm_api_key.clone())))
}

fn exit_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Completed => 0,
        Verdict::BackendFailure(_) => EXIT_BACKEND,
        _ => EXIT_UNFINISHED,
    }
}

fn cmd_run(args: &RunArgs, cfg: &CliConfig) -> CmdResult {
    let test = TestCase::load(&args.test).map_err(anyhow::Error::msg)?;
    let mut agent = cfg.agent.clone();
    if let Some(n) = args.max_steps {
        agent.max_steps = n;
    }
    agent.record_for_distillation |= args.record;
    agent.validate().map_err(anyhow::Error::msg)?;
    let llm = make_llm(args.script.as_deref(), cfg)?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut sink = if args.record {
        Some(RecorderSink::append_to(&out.join(format!("exchanges-{}.jsonl", test.id)))?)
    } else {
        None
    };
    let trace = match args.backend {
        Backend::Sim => {
            let base = args.test.parent().unwrap_or(Path::new("."));
            let app = load_spec_file(&relative_to(base, &test.app_binding))?;
            run_sim_test(&test, Arc::new(app), llm.as_ref(), &agent, sink.as_mut())
        }
        Backend::Webdriver => {
            let Some(url) = &cfg.webdriver_url else {
                return Err(anyhow::anyhow!("no WebDriver URL: set {}", config::ENV_WEBDRIVER).into());
            };
            let mut caps = cfg.capabilities.clone();
            caps.insert("appium:appPackage".into(), Value::String(test.app_binding.clone()));
            let mut session = open_session(url, &caps)
                .map_err(|e| Failure(EXIT_BACKEND, anyhow::anyhow!("opening session: {e}")))?;
            run_test_case(&test, &mut session, llm.as_ref(), &agent, sink.as_mut())
        }
    };
    let path = out.join(trace_file_name(trace.trace_id()));
    write_trace(&path, &trace).map_err(|e| Failure(EXIT_BACKEND, e.into()))?;
    let goal = match trace.goal_satisfied {
        Some(true) => ", goal reached",
        Some(false) => ", goal not reached",
        None => "",
    };
    println!(
        "{}: {} after {} step(s){goal} ({})",
        test.id,
        trace.verdict,
        trace.executed_steps(),
        path.display()
    );
    Ok(exit_code(&trace.verdict))
}

fn verdicts_path(explicit: Option<PathBuf>, cfg: &CliConfig) -> PathBuf {
    explicit.unwrap_or_else(|| cfg.output_dir.join("verdicts.json"))
}

fn cmd_suite(path: &Path, verdicts: Option<PathBuf>, cfg: &CliConfig) -> CmdResult {
    let mut spec = SuiteSpec::load(path)?;
    if spec.webdriver_url.is_none() {
        spec.webdriver_url = cfg.webdriver_url.clone();
    }
    let verdicts = load_verdicts(&verdicts_path(verdicts, cfg)).map_err(anyhow::Error::msg)?;
    let opts = RunOptions {
        base_dir: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        output_dir: Some(cfg.output_dir.clone()),
        api_key: cfg.llm_api_key.clone(),
        verdicts,
    };
    let run = run_suite(&spec, &opts)?;
    write_reports(&cfg.output_dir, &run.report)?;
    print!("{}", render_report(&run.report));
    Ok(0)
}

fn write_reports(dir: &Path, report: &nlgui_core::eval::SuiteReport) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    std::fs::write(dir.join("report.txt"), render_report(report))?;
    Ok(())
}

fn load_traces(dir: &Path) -> anyhow::Result<Vec<ExecutionTrace>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trace-") && n.ends_with(".jsonl"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| read_trace(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

/// Oracle labels for traces whose app spec can be found under `apps`.
fn oracle_labels(traces: &[ExecutionTrace], apps: Option<&Path>) -> HashMap<String, OracleLabels> {
    let mut out = HashMap::new();
    let Some(base) = apps else { return out };
    for t in traces {
        let Some(goal) = &t.test.goal else { continue };
        let labels = load_spec_file(&relative_to(base, &t.test.app_binding))
            .map_err(|e| e.to_string())
            .and_then(|app| label_trace(&app, goal, &t.actions()).map_err(|e| e.to_string()));
        match labels {
            Ok(l) => {
                out.insert(t.trace_id().to_string(), l);
            }
            Err(e) => log::info!("no oracle labels for `{}`: {e}", t.trace_id()),
        }
    }
    out
}

fn cmd_verdict(args: &VerdictArgs, cfg: &CliConfig) -> CmdResult {
    let path = verdicts_path(args.file.clone(), cfg);
    let mut verdicts = load_verdicts(&path).map_err(anyhow::Error::msg)?;
    let mut changed = 0;
    if let Some(from) = &args.from {
        let incoming = load_verdicts(from).map_err(anyhow::Error::msg)?;
        if incoming.is_empty() && !from.exists() {
            return Err(anyhow::anyhow!("{} does not exist", from.display()).into());
        }
        changed += incoming.len();
        verdicts.extend(incoming);
    }
    match (&args.id, &args.verdict) {
        (Some(id), Some(v)) => {
            let pass = match v.as_str() {
                "pass" | "true" | "yes" => true,
                "fail" | "false" | "no" => false,
                other => return Err(anyhow::anyhow!("verdict must be pass or fail, got `{other}`").into()),
            };
            verdicts.insert(id.clone(), pass);
            changed += 1;
        }
        (Some(_), None) => return Err(anyhow::anyhow!("missing verdict (pass or fail)").into()),
        _ => {}
    }
    if args.interactive {
        let dir = args.traces.as_deref().unwrap_or(&cfg.output_dir);
        changed += ask_verdicts(&load_traces(dir)?, &mut verdicts)?;
    }
    if changed == 0 && !args.interactive {
        return Err(anyhow::anyhow!("nothing to record: give ID and VERDICT, --from or --interactive").into());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_verdicts(&path, &verdicts).map_err(anyhow::Error::msg)?;
    println!("{changed} verdict(s) recorded in {}", path.display());
    Ok(0)
}

fn ask_verdicts(traces: &[ExecutionTrace], verdicts: &mut Verdicts) -> anyhow::Result<usize> {
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut n = 0;
    for t in traces.iter().filter(|t| t.verdict.is_completed()) {
        if verdicts.contains_key(t.trace_id()) {
            continue;
        }
        println!("{}: {}", t.trace_id(), t.test.description);
        for r in t.executed() {
            println!("  {}. {} {:?}", r.step, r.action, r.element_label);
        }
        print!("passed? [y/n/s] ");
        std::io::stdout().flush()?;
        let Some(answer) = lines.next().transpose()? else { break };
        match answer.trim() {
            "y" | "yes" => verdicts.insert(t.trace_id().to_string(), true),
            "n" | "no" => verdicts.insert(t.trace_id().to_string(), false),
            _ => continue,
        };
        n += 1;
    }
    Ok(n)
}

fn cmd_lint(tests: &[PathBuf], text: Option<&str>) -> CmdResult {
    let mut inputs = Vec::new();
    if let Some(t) = text {
        inputs.push(("text".to_string(), lint_text(t)));
    }
    for p in tests {
        let t = TestCase::load(p).map_err(anyhow::Error::msg)?;
        inputs.push((t.id.clone(), lint_description(&t)));
    }
    if inputs.is_empty() {
        return Err(anyhow::anyhow!("nothing to lint: give test files or --text").into());
    }
    for (name, findings) in inputs {
        if findings.is_empty() {
            println!("{name}: ok");
        }
        for f in findings {
            let kind = serde_json::to_value(f.kind)?;
            println!("{name}: {}: {}", kind.as_str().unwrap_or_default(), f.message);
            println!("  hint: {}", f.hint);
        }
    }
    Ok(0)
}

fn cmd_export(args: &TraceArgs, factor: f64, cfg: &CliConfig) -> CmdResult {
    let traces = load_traces(args.traces.as_deref().unwrap_or(&cfg.output_dir))?;
    let oracles = oracle_labels(&traces, args.apps.as_deref());
    let filters = FilterConfig {
        inefficiency_factor: factor,
    };
    let records = export_distill(&traces, &oracles, &filters)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("distill.jsonl");
    write_distill(&path, &records)?;
    println!("{} record(s) written to {}", records.len(), path.display());
    Ok(0)
}

fn cmd_report(args: &TraceArgs, verdicts: Option<PathBuf>, meta: ReportMeta, cfg: &CliConfig) -> CmdResult {
    let traces = load_traces(args.traces.as_deref().unwrap_or(&cfg.output_dir))?;
    let oracles = oracle_labels(&traces, args.apps.as_deref());
    let verdicts = load_verdicts(&verdicts_path(verdicts, cfg)).map_err(anyhow::Error::msg)?;
    let report = compute_metrics(&traces, &verdicts, &oracles, meta);
    write_reports(&cfg.output_dir, &report)?;
    print!("{}", render_report(&report));
    Ok(0)
}
