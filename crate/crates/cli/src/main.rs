//! `voxhub`: run the gateway, standalone mock backends, scripted
//! conversations, load benchmarks and pipeline sweeps.
//!
//! Exit codes: 0 on success, 1 when an expectation is not met, 2 on usage or
//! configuration errors.

mod output;

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tokio::net::TcpListener;
use tracing::info;
use tracing_subscriber::EnvFilter;

use voxhub_core::backends::server::{self, BackendServices};
use voxhub_core::backends::{
    AgentEndpoint, BuiltinAgent, ConversationalAgent, MockStt, MockTts, TimeMode,
};
use voxhub_core::bench::{self, BackendModels, BenchConfig, BenchTarget};
use voxhub_core::chunker::{chunk_response, ChunkingConfig};
use voxhub_core::gateway::{self, Gateway, GatewayConfig};
use voxhub_core::pipeline::{sweep, write_csv, SweepGrid};
use voxhub_core::scenario::{self, ScenarioScript};

#[derive(Parser)]
#[command(name = "voxhub", version, about = "Voice-conversation gateway with chunked speech synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gateway.
    Run(RunArgs),
    /// Serve mock STT and TTS (and optionally the builtin agents) over HTTP.
    ServeBackends(ServeBackendsArgs),
    /// Replay scenario scripts in simulated time and check their expectations.
    Simulate(SimulateArgs),
    /// Run concurrent scripted sessions and report latency statistics.
    Bench(BenchArgs),
    /// Print the chunks of a reply, one per line.
    Chunk(ChunkArgs),
    /// Pipeline timing tools.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeModeArg {
    Wallclock,
    Simulated,
}

impl From<TimeModeArg> for TimeMode {
    fn from(arg: TimeModeArg) -> Self {
        match arg {
            TimeModeArg::Wallclock => TimeMode::Wallclock,
            TimeModeArg::Simulated => TimeMode::Simulated,
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// Gateway configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `time_mode` from the file.
    #[arg(long, value_enum)]
    time_mode: Option<TimeModeArg>,
    /// Use the mock STT and TTS even if URLs are configured.
    #[arg(long)]
    builtin_backends: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<GatewayConfig> {
        let mut config = match &self.config {
            Some(path) => GatewayConfig::load(path)?,
            None => GatewayConfig::default(),
        };
        config.apply_env();
        if let Some(mode) = self.time_mode {
            config.time_mode = mode.into();
        }
        if self.builtin_backends {
            config.force_builtin();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Overrides `listen` from the file.
    #[arg(long)]
    listen: Option<String>,
}

#[derive(Args)]
struct ServeBackendsArgs {
    /// Latency models and voices are taken from this gateway configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:5005")]
    listen: String,
    /// Also serve the builtin agents under /agents/{id}/v1/respond.
    #[arg(long)]
    serve_agents: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario script files (TOML).
    #[arg(required = true)]
    scripts: Vec<PathBuf>,
    /// Gateway configuration; time mode and backends are forced to simulated builtins.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print outcomes as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    sessions: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    turns: u64,
    #[arg(long, default_value = "triage")]
    agent: String,
    /// Bench a running gateway, e.g. ws://127.0.0.1:8080/session. The
    /// configuration must then describe that gateway's backends.
    #[arg(long)]
    url: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ChunkArgs {
    #[arg(long)]
    text: String,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    min_tokens: Option<usize>,
    /// Keep short chunks instead of merging them into neighbours.
    #[arg(long)]
    no_merge: bool,
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Schedule a grid of equal-chunk turns and print CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    rtf: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "800")]
    stt_ms: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "100")]
    agent_ms: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    n_chunks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2000")]
    chunk_ms: Vec<u64>,
}

/// Configuration problems exit with 2, failed expectations with 1.
enum Failure {
    Usage(anyhow::Error),
    Expectation,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Expectation) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain on one line, skipping causes a message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut line = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !line.contains(&text) {
            if !line.is_empty() {
                line.push_str(": ");
            }
            line.push_str(&text);
        }
    }
    line
}

async fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => run(args).await?,
        Command::ServeBackends(args) => serve_backends(args).await?,
        Command::Simulate(args) => return simulate(args).await,
        Command::Bench(args) => return run_bench(args).await,
        Command::Chunk(args) => chunk(args)?,
        Command::Pipeline(PipelineCommand::Sweep(args)) => pipeline_sweep(args)?,
    }
    Ok(())
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
    info!("shutting down");
}

async fn run(args: RunArgs) -> Result<()> {
    let mut config = args.config.load()?;
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    let listener = TcpListener::bind(&config.listen)
        .await
        .with_context(|| format!("cannot listen on {}", config.listen))?;
    info!(
        addr = %listener.local_addr()?,
        time_mode = ?config.time_mode,
        builtin = config.uses_only_builtins(),
        "gateway listening"
    );
    let gateway = Gateway::new(config)?;
    gateway::serve(gateway.clone(), listener, shutdown_signal()).await?;
    println!("{}", serde_json::to_string_pretty(&gateway.metrics_snapshot())?);
    Ok(())
}

async fn serve_backends(args: ServeBackendsArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => GatewayConfig::load(path)?,
        None => GatewayConfig::default(),
    };
    let mode = TimeMode::Wallclock;
    let mut agents: HashMap<String, Arc<dyn ConversationalAgent>> = HashMap::new();
    if args.serve_agents {
        for agent in &config.agents {
            if let AgentEndpoint::Builtin(kind) = agent.endpoint {
                let builtin = BuiltinAgent::new(kind, config.agent_latency.clone(), mode);
                agents.insert(agent.agent_id.clone(), Arc::new(builtin));
            }
        }
    }
    let services = BackendServices {
        stt: Some(Arc::new(MockStt::new(config.stt.latency.clone(), mode))),
        tts: Some(Arc::new(MockTts::new(
            config.voices.clone(),
            config.tts.latency.clone(),
            mode,
        ))),
        agents,
    };
    let listener = TcpListener::bind(&args.listen)
        .await
        .with_context(|| format!("cannot listen on {}", args.listen))?;
    let mut ids: Vec<_> = services.agents.keys().cloned().collect();
    ids.sort();
    info!(addr = %listener.local_addr()?, agents = ?ids, "mock backends listening");
    axum::serve(listener, server::router(services))
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    Ok(())
}

async fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = match &args.config {
        Some(path) => GatewayConfig::load(path).map_err(anyhow::Error::from)?,
        None => GatewayConfig::simulated(),
    };
    let mut outcomes = Vec::new();
    for path in &args.scripts {
        let script = ScenarioScript::load(path).map_err(anyhow::Error::from)?;
        let outcome = scenario::simulate(&script, config.clone())
            .await
            .with_context(|| format!("running {}", path.display()))?;
        outcomes.push(outcome);
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcomes).map_err(anyhow::Error::from)?);
    } else {
        for outcome in &outcomes {
            output::print_outcome(outcome);
        }
    }
    if outcomes.iter().all(|o| o.passed()) {
        Ok(())
    } else {
        Err(Failure::Expectation)
    }
}

async fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    let config = args.config.load()?;
    let target = match &args.url {
        Some(url) => BenchTarget::WebSocket(url.clone()),
        None => {
            let mut config = config.clone();
            config.max_sessions = config.max_sessions.max(args.sessions as usize);
            BenchTarget::InProcess(Gateway::new(config).map_err(anyhow::Error::from)?)
        }
    };
    let report = bench::run(
        target,
        BenchConfig {
            sessions: args.sessions as usize,
            turns: args.turns as usize,
            agent_id: args.agent,
            models: Some(BackendModels::from_config(&config)),
        },
    )
    .await;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
    } else {
        output::print_bench(&report);
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(Failure::Expectation)
    }
}

fn chunk(args: ChunkArgs) -> Result<()> {
    let mut cfg = ChunkingConfig::default();
    if let Some(max) = args.max_tokens {
        cfg = cfg.with_max_tokens(max);
    }
    if let Some(min) = args.min_tokens {
        cfg = cfg.with_min_tokens(min);
    }
    cfg.merge_short = !args.no_merge;
    cfg.validate()?;
    for c in chunk_response(&args.text, &cfg) {
        println!("{}", c.text());
    }
    Ok(())
}

fn pipeline_sweep(args: SweepArgs) -> Result<()> {
    if let Some(bad) = args.rtf.iter().find(|r| !r.is_finite() || **r < 0.0) {
        anyhow::bail!("rtf must be a non-negative number, got {bad}");
    }
    if args.n_chunks.contains(&0) {
        anyhow::bail!("n-chunks must be at least 1");
    }
    let grid = SweepGrid {
        rtf: args.rtf,
        stt_ms: args.stt_ms,
        agent_ms: args.agent_ms,
        n_chunks: args.n_chunks,
        chunk_ms: args.chunk_ms,
    };
    let rows = sweep(&grid)?;
    write_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}
