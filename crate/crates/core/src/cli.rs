//! Command-line front end. Every command is one API call (or a script of
//! them), made in-process with `--local` or against a running server.
//!
//! Exit codes: 0 ok, 1 failed assertion, corrupt log or other error,
//! 2 no confident route, 3 backend unavailable, 64 usage.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::reasoning::PersonaTag;
use crate::response::FinalResponse;
use crate::scenario::{self, ScenarioRunner, ScenarioScript};
use crate::service::{http, replay, ApiError, Client, Config, DecisionRequest, QueryRequest, QueryStatus, Runtime};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_ROUTING: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "verticore", version, about = "Vertical AI agent runtime")]
pub struct Cli {
    /// Configuration file.
    #[arg(long, global = true, env = "VERTICORE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Server address for remote commands.
    #[arg(long, global = true, env = "VERTICORE_ADDR")]
    pub addr: Option<String>,
    /// Run in-process against the configured fixtures instead of a server.
    #[arg(long, global = true)]
    pub local: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatternArg {
    Router,
    Orchestrated,
    Hitl,
    WorkflowChain,
}

impl PatternArg {
    fn as_str(self) -> &'static str {
        match self {
            Self::Router => "router",
            Self::Orchestrated => "orchestrated",
            Self::Hitl => "hitl",
            Self::WorkflowChain => "workflow-chain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PersonaArg {
    Empathetic,
    Professional,
    Casual,
}

impl From<PersonaArg> for PersonaTag {
    fn from(p: PersonaArg) -> Self {
        match p {
            PersonaArg::Empathetic => Self::Empathetic,
            PersonaArg::Professional => Self::Professional,
            PersonaArg::Casual => Self::Casual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecisionArg {
    Approved,
    Rejected,
    Modified,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upsert a JSON Lines corpus into a domain, or triples with --kg.
    Ingest {
        #[arg(long, required_unless_present = "kg")]
        domain: Option<String>,
        #[arg(long)]
        path: PathBuf,
        /// The file holds knowledge-graph triples.
        #[arg(long, conflicts_with = "domain")]
        kg: bool,
    },
    /// Run one query through a pattern.
    Ask {
        #[arg(long, value_enum)]
        pattern: PatternArg,
        #[arg(long)]
        session: String,
        #[arg(long, value_enum)]
        persona: Option<PersonaArg>,
        /// Domain for hitl drafts; classified when absent.
        #[arg(long)]
        domain: Option<String>,
        text: String,
    },
    /// Serve the HTTP API.
    Serve {
        /// Overrides service.listen.
        #[arg(long)]
        listen: Option<SocketAddr>,
    },
    /// Review queue operations.
    Review {
        #[command(subcommand)]
        command: ReviewCommand,
    },
    /// Scripted scenarios.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Rebuild state from an event log and print its digest.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// List reviews, optionally by status.
    List {
        #[arg(long)]
        status: Option<String>,
    },
    /// Record a decision and deliver the reviewed response.
    Decide {
        review_id: String,
        #[arg(long, value_enum)]
        status: DecisionArg,
        #[arg(long)]
        note: Option<String>,
        #[arg(long)]
        replacement_text: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Run a scenario in-process and print its step table and state digest.
    Run {
        name: String,
        /// Write the event log here; the file must be new or empty.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// List available scenarios.
    List,
}

/// An error with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let code = match (e.error.as_str(), e.status) {
            ("NoConfidentRoute", _) => EXIT_ROUTING,
            ("BackendUnavailable", _) | (_, 502) | (_, 503) => EXIT_BACKEND,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        ApiError::from(e).into()
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::new(EXIT_USAGE, "this command needs --config or VERTICORE_CONFIG"))?;
    Config::load(path).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))
}

fn client(cli: &Cli) -> Result<Client, Failure> {
    if cli.local {
        let mut config = load_config(cli)?;
        config.preload = true;
        return Ok(Client::local(Arc::new(Runtime::from_config(&config)?)));
    }
    let addr = match &cli.addr {
        Some(a) => a.clone(),
        None => match &cli.config {
            Some(_) => load_config(cli)?.service.listen,
            None => crate::service::config::DEFAULT_LISTEN.to_string(),
        },
    };
    Ok(Client::remote(&addr)?)
}

fn io(e: std::io::Error) -> Failure {
    Failure::new(EXIT_FAILURE, e.to_string())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Ingest { domain, path, kg } => {
            let body = std::fs::read_to_string(path)
                .map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
            let client = client(&cli)?;
            let reply = match (kg, domain) {
                (true, _) => client.ingest_triples(&body)?,
                (false, Some(d)) => client.ingest_documents(d, &body)?,
                (false, None) => return Err(Failure::new(EXIT_USAGE, "--domain is required")),
            };
            writeln!(out, "upserted: {}", reply.upserted).map_err(io)?;
        }
        Command::Ask {
            pattern,
            session,
            persona,
            domain,
            text,
        } => {
            let client = client(&cli)?;
            let reply = client.query(&QueryRequest {
                session_id: session.clone(),
                text: text.clone(),
                pattern: pattern.as_str().into(),
                persona: persona.map(PersonaTag::from),
                domain: domain.clone(),
            })?;
            match (reply.status, reply.response) {
                (QueryStatus::PendingReview, _) => {
                    writeln!(out, "pending-review {}", reply.review_id.unwrap_or_default()).map_err(io)?;
                    writeln!(out, "query: {}", reply.query_id).map_err(io)?;
                }
                (QueryStatus::Delivered, Some(response)) => print_response(out, &response).map_err(io)?,
                (QueryStatus::Delivered, None) => writeln!(out, "{} delivered", reply.query_id).map_err(io)?,
            }
        }
        Command::Serve { listen } => {
            let config = load_config(&cli)?;
            let addr: SocketAddr = match listen {
                Some(a) => *a,
                None => config
                    .service
                    .listen
                    .parse()
                    .map_err(|e| Failure::new(EXIT_FAILURE, format!("service.listen: {e}")))?,
            };
            let runtime = Arc::new(Runtime::from_config(&config)?);
            let rt = tokio::runtime::Runtime::new().map_err(io)?;
            writeln!(out, "listening on {addr}").map_err(io)?;
            out.flush().map_err(io)?;
            rt.block_on(http::serve(runtime, addr)).map_err(io)?;
        }
        Command::Review { command } => {
            let client = client(&cli)?;
            match command {
                ReviewCommand::List { status } => {
                    for r in client.list_reviews(status.as_deref())? {
                        writeln!(
                            out,
                            "{}  {}  {:<8}  {:<10}  risk {:.2}  {}",
                            r.review_id,
                            r.query_id,
                            r.status.as_str(),
                            r.domain,
                            r.risk_score,
                            r.query_text
                        )
                        .map_err(io)?;
                    }
                }
                ReviewCommand::Decide {
                    review_id,
                    status,
                    note,
                    replacement_text,
                } => {
                    let status = match status {
                        DecisionArg::Approved => "approved",
                        DecisionArg::Rejected => "rejected",
                        DecisionArg::Modified => "modified",
                    };
                    let item = client.decide(
                        review_id,
                        &DecisionRequest {
                            status: status.into(),
                            note: note.clone(),
                            replacement_text: replacement_text.clone(),
                        },
                    )?;
                    writeln!(out, "{} {}", item.review_id, item.status.as_str()).map_err(io)?;
                    let view = client.get_query(&item.query_id)?;
                    if let Some(response) = view.record.response {
                        print_response(out, &response).map_err(io)?;
                    }
                }
            }
        }
        Command::Scenario { command } => {
            let config = load_config(&cli)?;
            let dir = config
                .path(|p| &p.scenarios)
                .ok_or_else(|| Failure::new(EXIT_FAILURE, "paths.scenarios is not configured"))?;
            match command {
                ScenarioCommand::List => {
                    for name in scenario::list(&dir).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))? {
                        writeln!(out, "{name}").map_err(io)?;
                    }
                }
                ScenarioCommand::Run { name, log } => {
                    let (script, path) =
                        ScenarioScript::find(&dir, name).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
                    let report = run_scenario(config, &script, &path, log.as_deref())?;
                    writeln!(out, "{report}").map_err(io)?;
                    if !report.passed() {
                        return Ok(EXIT_FAILURE);
                    }
                }
            }
        }
        Command::Replay { log } => {
            let state = replay(log)?;
            let events = crate::service::read_log(log)?.len();
            writeln!(out, "events: {events}").map_err(io)?;
            writeln!(out, "state digest: {}", state.digest()).map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

/// Runs `script` on a fresh runtime built from `config`, logging to `log`.
pub fn run_scenario_with(
    mut config: Config,
    script: &ScenarioScript,
    script_path: &Path,
    log: Option<&Path>,
) -> Result<scenario::ScenarioReport, crate::Error> {
    config.preload = false;
    config.paths.event_log = log.map(Path::to_path_buf);
    let runtime = Arc::new(Runtime::from_config(&config)?);
    let base = script_path.parent().unwrap_or(Path::new("."));
    Ok(ScenarioRunner::new(runtime).run(script, base))
}

fn run_scenario(
    config: Config,
    script: &ScenarioScript,
    script_path: &Path,
    log: Option<&Path>,
) -> Result<scenario::ScenarioReport, Failure> {
    if let Some(log) = log {
        if std::fs::metadata(log).is_ok_and(|m| m.len() > 0) {
            return Err(Failure::new(
                EXIT_FAILURE,
                format!(
                    "{} already holds events; scenarios start from an empty log",
                    log.display()
                ),
            ));
        }
        if log.exists() {
            std::fs::remove_file(log).map_err(io)?;
        }
    }
    Ok(run_scenario_with(config, script, script_path, log)?)
}

fn print_response(out: &mut dyn Write, r: &FinalResponse) -> std::io::Result<()> {
    let p = &r.provenance;
    writeln!(out, "{}", r.text)?;
    writeln!(out)?;
    writeln!(out, "query: {}", r.query_id)?;
    writeln!(out, "pattern: {}", p.pattern.as_str())?;
    writeln!(out, "persona: {}", r.persona.as_str())?;
    writeln!(out, "domains: {}", p.domains_touched.join(", "))?;
    if !p.documents.is_empty() {
        let docs: Vec<String> = p
            .documents
            .iter()
            .map(|d| format!("{}/{} ({:.3})", d.domain, d.doc_id, d.score))
            .collect();
        writeln!(out, "documents: {}", docs.join(", "))?;
    }
    if !p.triples.is_empty() {
        writeln!(out, "facts: {}", p.triples.len())?;
    }
    if !p.web_results.is_empty() {
        let urls: Vec<&str> = p.web_results.iter().map(|w| w.source_url.as_str()).collect();
        writeln!(out, "web: {}", urls.join(", "))?;
    }
    if !p.agents.is_empty() {
        writeln!(out, "agents: {}", p.agents.join(", "))?;
    }
    let verdict = match p.risk.verdict {
        crate::skills::Verdict::Allow => "allow",
        crate::skills::Verdict::Block => "block",
    };
    writeln!(out, "risk: {verdict} (score {:.2})", p.risk.score)?;
    if let Some(i) = &p.intercepted {
        writeln!(
            out,
            "intercepted: score {:.2}, {} flagged spans",
            i.score,
            i.spans.len()
        )?;
    }
    if let Some(review) = &p.review_id {
        writeln!(out, "review: {review}")?;
    }
    writeln!(
        out,
        "outcome: {}",
        if p.outcome == crate::response::Outcome::Delivered {
            "delivered"
        } else {
            "blocked"
        }
    )
}
