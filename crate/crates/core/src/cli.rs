//! The `woz` command line: argument definitions and one runner per
//! subcommand. Runners return their report as a string so they can be used
//! and tested without a process boundary.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analytics::{self, Corpus, CoverageOptions, DEFAULT_PARTIAL_THRESHOLD};
use crate::bridge::{self, Backoff, MappingTable};
use crate::environment::EnvironmentMap;
use crate::inventory::{check_inventory, Registry};
use crate::router::transcript::read_transcript;
use crate::router::{DialogueEvent, Origin, Phase, Role, Router, SessionId};
use crate::server;
use crate::template::EntityResolver;

#[derive(Debug, Parser)]
#[command(name = "woz", version, about = "Wizard-of-Oz dialogue session tools")]
pub struct Cli {
    /// Log more detail to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the session server.
    Serve(ServeArgs),
    /// Forward between a wizard-side and a robot-side endpoint.
    Bridge(BridgeArgs),
    /// Check an inventory (and optionally an environment map).
    Validate(ValidateArgs),
    /// Print the inventory fragment generated from an environment map.
    GenerateEnv(GenerateEnvArgs),
    /// Corpus and transcript statistics.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Re-drive a transcript's button presses against an inventory.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "WOZ_LISTEN", default_value = "127.0.0.1:8700")]
    pub listen: SocketAddr,
    #[arg(long)]
    pub inventory: PathBuf,
    #[arg(long)]
    pub env_map: Option<PathBuf>,
    #[arg(long, env = "WOZ_LOG_DIR")]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BridgeArgs {
    /// JSON mapping table.
    #[arg(long)]
    pub table: PathBuf,
    /// Wizard-side endpoint (host:port).
    #[arg(long)]
    pub wizard: SocketAddr,
    /// Robot-side endpoint (host:port).
    #[arg(long)]
    pub robot: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub inventory: PathBuf,
    #[arg(long)]
    pub env_map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GenerateEnvArgs {
    pub env: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    Coverage {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long)]
        env_map: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PARTIAL_THRESHOLD)]
        partial_threshold: f64,
        #[command(flatten)]
        report: ReportArgs,
    },
    Frequency {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    Pacing {
        #[arg(long)]
        log: PathBuf,
        /// A second transcript to compare against the first.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub transcript: PathBuf,
    #[arg(long)]
    pub inventory: PathBuf,
    #[arg(long)]
    pub env_map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// Outcome of a subcommand: what to print and the process exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, stderr: String::new(), code: 0 }
    }

    fn fail(code: i32, stderr: impl Into<String>) -> Self {
        Outcome { stdout: String::new(), stderr: stderr.into(), code }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Serve(args) => run_serve(args),
        Command::Bridge(args) => run_bridge(args),
        Command::Validate(args) => {
            let (report, ok) = validate(&args.inventory, args.env_map.as_deref());
            let stdout = match args.format {
                Format::Text => report.to_text(),
                Format::Json => report.to_json(),
            };
            Outcome { stdout, stderr: String::new(), code: if ok { 0 } else { 1 } }
        }
        Command::GenerateEnv(args) => match generate_env(&args.env) {
            Ok(text) => Outcome::ok(text),
            Err(e) => Outcome::fail(1, e),
        },
        Command::Analyze(cmd) => match analyze(cmd) {
            Ok(text) => Outcome::ok(text),
            Err(e) => Outcome::fail(2, e),
        },
        Command::Replay(args) => {
            let (registry, env) = match load_registry(&args.inventory, args.env_map.as_deref()) {
                Ok(loaded) => loaded,
                Err(e) => return Outcome::fail(2, e),
            };
            let events = match read_transcript(&args.transcript) {
                Ok(events) => events,
                Err(e) => return Outcome::fail(2, format!("{}: {e}", args.transcript.display())),
            };
            let report = replay(&events, registry, env);
            let stdout = match args.format {
                Format::Text => report.to_string(),
                Format::Json => to_json_line(&report),
            };
            let code = if report.mismatches.is_empty() { 0 } else { 1 };
            Outcome { stdout, stderr: String::new(), code }
        }
    }
}

// --- validate --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: String,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub buttons: usize,
    pub tabs: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn to_text(&self) -> String {
        if self.diagnostics.is_empty() {
            return format!("ok: {} buttons, {} tabs\n", self.buttons, self.tabs);
        }
        let mut out = String::new();
        for d in &self.diagnostics {
            let _ = writeln!(out, "{}\t{}\t{}", d.code, d.location, d.message);
        }
        out
    }

    pub fn to_json(&self) -> String {
        to_json_line(self)
    }
}

/// Checks every invariant and reports all violations; the flag is true iff
/// there are none.
pub fn validate(inventory: &Path, env_map: Option<&Path>) -> (ValidationReport, bool) {
    let mut report = ValidationReport::default();
    let diag = |code: &str, location: String, message: String| Diagnostic {
        code: code.to_string(),
        location,
        message,
    };
    let env = match env_map.map(EnvironmentMap::load_path) {
        Some(Ok(map)) => Some(map),
        Some(Err(e)) => {
            let location = env_map.unwrap().display().to_string();
            report.diagnostics.push(diag("invalid-map", location, e.to_string()));
            None
        }
        None => None,
    };
    let text = match std::fs::read_to_string(inventory) {
        Ok(text) => text,
        Err(e) => {
            let location = inventory.display().to_string();
            report.diagnostics.push(diag("io", location, e.to_string()));
            return (report, false);
        }
    };
    let resolver = env.as_ref().map(|m| m as &dyn EntityResolver);
    for e in check_inventory(&text, resolver) {
        report.diagnostics.push(diag(e.code(), e.location().to_string(), e.to_string()));
    }
    if report.diagnostics.is_empty() {
        if let Ok(registry) = Registry::load_with(&text, resolver) {
            report.buttons = registry.button_count();
            report.tabs = registry.tab_count();
        }
    }
    let ok = report.diagnostics.is_empty();
    (report, ok)
}

// --- generate-env ----------------------------------------------------------

pub fn generate_env(path: &Path) -> Result<String, String> {
    let map = EnvironmentMap::load_path(path).map_err(|e| e.to_string())?;
    let mut text = map.inventory_fragment().to_json_pretty();
    text.push('\n');
    Ok(text)
}

// --- analyze ---------------------------------------------------------------

fn analyze(cmd: AnalyzeCommand) -> Result<String, String> {
    let (text, report) = match cmd {
        AnalyzeCommand::Frequency { corpus, report } => {
            let corpus = Corpus::load_path(&corpus).map_err(|e| e.to_string())?;
            let r = analytics::frequency(&corpus).map_err(|e| e.to_string())?;
            (render(&r, report.format), report)
        }
        AnalyzeCommand::Coverage { corpus, inventory, env_map, partial_threshold, report } => {
            let env = env_map.map(|p| EnvironmentMap::load_path(p).map_err(|e| e.to_string())).transpose()?;
            let resolver = env.as_ref().map(|m| m as &dyn EntityResolver);
            let registry = Registry::load_path(&inventory, resolver).map_err(|e| e.to_string())?;
            let corpus = Corpus::load_path(&corpus).map_err(|e| e.to_string())?;
            let options = CoverageOptions {
                partial_threshold,
                entities: env.as_ref().map(|m| m as &(dyn EntityResolver + Sync)),
            };
            let r = analytics::coverage_with(&corpus, &registry, options);
            (render(&r, report.format), report)
        }
        AnalyzeCommand::Pacing { log, compare, report } => {
            let read = |p: &Path| read_transcript(p).map_err(|e| format!("{}: {e}", p.display()));
            let a = analytics::pacing(&read(&log)?);
            let text = match compare {
                None => render(&a, report.format),
                Some(other) => {
                    let b = analytics::pacing(&read(&other)?);
                    let c = analytics::compare_pacing(&a, &b).map_err(|e| e.to_string())?;
                    match report.format {
                        Format::Text => format!("{a}---\n{b}---\n{c}"),
                        Format::Json => to_json_line(&json!({"a": a, "b": b, "comparison": c})),
                    }
                }
            };
            (text, report)
        }
    };
    if let Some(out) = &report.out {
        std::fs::write(out, &text).map_err(|e| format!("{}: {e}", out.display()))?;
    }
    Ok(text)
}

fn render<T: Serialize + std::fmt::Display>(report: &T, format: Format) -> String {
    match format {
        Format::Text => report.to_string(),
        Format::Json => to_json_line(report),
    }
}

fn to_json_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

// --- replay ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub session_id: SessionId,
    pub seq: u64,
    pub button_id: String,
    pub logged: String,
    /// The regenerated text, or the error that prevented regenerating it.
    pub regenerated: Result<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub events: usize,
    pub button_events: usize,
    /// Regenerated text of every button event, keyed by (session, seq).
    pub regenerated: Vec<(SessionId, u64, String)>,
    pub mismatches: Vec<Mismatch>,
}

impl std::fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "events: {}", self.events)?;
        writeln!(f, "button_events: {}", self.button_events)?;
        writeln!(f, "mismatches: {}", self.mismatches.len())?;
        for m in &self.mismatches {
            let now = match &m.regenerated {
                Ok(text) => format!("now {text:?}"),
                Err(e) => format!("failed: {e}"),
            };
            writeln!(f, "  {} #{} {}: logged {:?}, {now}", m.session_id, m.seq, m.button_id, m.logged)?;
        }
        Ok(())
    }
}

/// Replays each logged session into a fresh router session: utterances and
/// notes are re-ingested, button presses are re-pressed with their logged
/// bindings, and any press whose text differs from the log is a mismatch.
pub fn replay(
    events: &[DialogueEvent],
    registry: Arc<Registry>,
    environment: Option<Arc<EnvironmentMap>>,
) -> ReplayReport {
    let mut router = Router::new(registry);
    if let Some(env) = environment {
        router = router.with_environment(env);
    }
    let mut sessions: HashMap<SessionId, SessionId> = HashMap::new();
    let mut report = ReplayReport { events: events.len(), ..Default::default() };
    for event in events {
        let live = sessions
            .entry(event.session_id.clone())
            .or_insert_with(|| {
                router
                    .open_session(event.session_id.as_str(), Phase::Training)
                    .expect("in-memory session opens")
                    .id
            })
            .clone();
        match (event.origin, event.sender) {
            (Origin::Button, _) => {
                report.button_events += 1;
                let button_id = event.button_id.clone().unwrap_or_default();
                let bindings = event.bindings.clone().unwrap_or_default();
                let regenerated = router
                    .press_button(&live, &button_id, &bindings)
                    .map(|e| e.text)
                    .map_err(|e| e.to_string());
                if let Ok(text) = &regenerated {
                    report.regenerated.push((event.session_id.clone(), event.seq, text.clone()));
                }
                if regenerated.as_ref() != Ok(&event.text) {
                    report.mismatches.push(Mismatch {
                        session_id: event.session_id.clone(),
                        seq: event.seq,
                        button_id,
                        logged: event.text.clone(),
                        regenerated,
                    });
                }
            }
            (Origin::IngestedUtterance, _) => {
                let _ = router.ingest_utterance(&live, &event.text);
            }
            (Origin::FreeText, Role::RnWizard) => {
                let _ = router.rn_note(&live, &event.text);
            }
            (Origin::FreeText, _) => {}
        }
    }
    report
}

type Loaded = (Arc<Registry>, Option<Arc<EnvironmentMap>>);

fn load_registry(inventory: &Path, env_map: Option<&Path>) -> Result<Loaded, String> {
    let env =
        env_map.map(|p| EnvironmentMap::load_path(p).map_err(|e| e.to_string())).transpose()?.map(Arc::new);
    let registry = Registry::load_path(inventory, env.as_deref().map(|m| m as &dyn EntityResolver))
        .map_err(|e| e.to_string())?;
    Ok((Arc::new(registry), env))
}

// --- long-running services ---------------------------------------------------

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Runtime::new().expect("tokio runtime starts")
}

fn run_serve(args: ServeArgs) -> Outcome {
    let env = match args.env_map.as_deref().map(EnvironmentMap::load_path).transpose() {
        Ok(env) => env.map(Arc::new),
        Err(e) => return Outcome::fail(2, e.to_string()),
    };
    let resolver = env.as_deref().map(|m| m as &dyn EntityResolver);
    let registry = match Registry::load_path(&args.inventory, resolver) {
        Ok(r) => Arc::new(r),
        Err(e) => return Outcome::fail(2, e.to_string()),
    };
    let mut router = Router::new(registry);
    if let Some(env) = env {
        router = router.with_environment(env);
    }
    if let Some(dir) = args.log_dir {
        if let Err(e) = std::fs::create_dir_all(&dir) {
            return Outcome::fail(2, format!("{}: {e}", dir.display()));
        }
        router = router.with_log_dir(dir);
    }
    let router = Arc::new(router);
    let result = runtime().block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.listen).await?;
        server::serve(listener, router).await
    });
    match result {
        Ok(()) => Outcome::ok(String::new()),
        Err(e) => Outcome::fail(2, e.to_string()),
    }
}

fn run_bridge(args: BridgeArgs) -> Outcome {
    let table = match std::fs::read_to_string(&args.table)
        .map_err(|e| format!("{}: {e}", args.table.display()))
        .and_then(|t| MappingTable::from_json(&t).map_err(|e| e.to_string()))
    {
        Ok(t) => t,
        Err(e) => return Outcome::fail(2, e),
    };
    runtime().block_on(async move {
        let mut handle = bridge::run_bridge(table, args.wizard, args.robot, Backoff::default());
        loop {
            tokio::select! {
                err = handle.next_error() => match err {
                    Some(e) => tracing::warn!("{e}"),
                    None => break,
                },
                _ = tokio::signal::ctrl_c() => break,
            }
        }
        let stats = handle.stats().to_string();
        handle.stop();
        Outcome::ok(format!("{stats}\n"))
    })
}
