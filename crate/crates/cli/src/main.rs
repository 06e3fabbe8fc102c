//! `cwm`: verify, score and play game code world models.

mod serve;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cwm_core::candidate::{candidate_factory, AdapterOptions, Candidate};
use cwm_core::games::{game_spec, GameError};
use cwm_core::protocol::{default_adapter_command, DEFAULT_CALL_TIMEOUT, DEFAULT_PREAMBLE};
use cwm_core::report::{RunConfig, VerificationReport};
use cwm_core::reward::{compute_reward, evaluate, EvalConfig, RewardConfig};
use cwm_core::solver::{play_match, AgentSpec, MatchReport, SolverError};
use cwm_core::tiers::scenarios::builtin_scenario_file;
use cwm_core::tiers::{parse_scenarios, ScenarioFile};
use cwm_core::GameSpec;

const EXIT_USAGE: u8 = 2;
const EXIT_FAULT: u8 = 3;

#[derive(Parser)]
#[command(name = "cwm", version, about = "Verifier, fuzzer and reward harness for game code world models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every tier and write a verification report.
    Verify(VerifyArgs),
    /// Compute the gated training reward.
    Reward(RewardArgs),
    /// Answer NDJSON reward requests on stdin.
    Serve(serve::ServeArgs),
    /// Play agents against each other on a candidate engine.
    Play(PlayArgs),
    /// Host built-in engines over the wire protocol.
    #[command(hide = true)]
    Adapter(AdapterCmdArgs),
}

#[derive(Args, Clone)]
pub struct AdapterArgs {
    /// Adapter command for file candidates [default: $CWM_ADAPTER or "cwm-adapter --stdio"]
    #[arg(long, value_name = "CMD")]
    adapter: Option<String>,
    /// Do not inject the import preamble into file candidates.
    #[arg(long)]
    no_preamble: bool,
    /// Per-call timeout for file candidates, in seconds.
    #[arg(long, value_name = "SECS", default_value_t = DEFAULT_CALL_TIMEOUT.as_secs_f64())]
    call_timeout: f64,
}

impl AdapterArgs {
    pub fn options(&self) -> Result<AdapterOptions> {
        let command = match &self.adapter {
            Some(cmd) => cmd.split_whitespace().map(str::to_string).collect(),
            None => default_adapter_command(),
        };
        if command.is_empty() {
            return Err(usage("empty adapter command"));
        }
        Ok(AdapterOptions {
            command,
            preamble: (!self.no_preamble).then(|| DEFAULT_PREAMBLE.to_string()),
            call_timeout: seconds(self.call_timeout, "--call-timeout")?,
            gauge: None,
        })
    }
}

#[derive(Args)]
struct Target {
    /// Registered game name.
    #[arg(long)]
    game: String,
    /// `builtin:NAME` or a candidate source file.
    #[arg(long)]
    candidate: String,
    /// Scenario file [default: the shipped fixtures for the game]
    #[arg(long, value_name = "PATH")]
    scenarios: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
    #[command(flatten)]
    adapter: AdapterArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 100)]
    fuzz_n: usize,
    #[arg(long, default_value_t = 100)]
    info_n: usize,
}

#[derive(Args)]
struct RewardArgs {
    #[command(flatten)]
    target: Target,
    /// Trajectories and probes per tier.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

#[derive(Args)]
struct PlayArgs {
    #[arg(long)]
    game: String,
    #[arg(long)]
    candidate: String,
    /// `random`, `mcts:sims=N[,c=X]` or `ismcts:sims=N[,c=X]`.
    #[arg(long)]
    agent0: String,
    #[arg(long)]
    agent1: String,
    #[arg(long, default_value_t = 100)]
    games: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
    #[command(flatten)]
    adapter: AdapterArgs,
}

#[derive(Args)]
struct AdapterCmdArgs {
    /// Serve the wire protocol on stdin/stdout.
    #[arg(long, required = true)]
    stdio: bool,
}

/// A caller mistake; exits with status 2.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Sorts core errors into usage errors and harness faults.
pub fn core_error(e: cwm_core::Error) -> anyhow::Error {
    match e {
        cwm_core::Error::Usage(m) => usage(m),
        cwm_core::Error::Game(g @ (GameError::Unknown { .. } | GameError::InvalidParams { .. })) => {
            usage(g.to_string())
        }
        other => anyhow::Error::new(other),
    }
}

fn seconds(v: f64, flag: &str) -> Result<Duration> {
    Duration::try_from_secs_f64(v)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| usage(format!("{flag} must be a positive number of seconds")))
}

pub fn lookup_game(name: &str) -> Result<GameSpec> {
    game_spec(name).map_err(|e| usage(e.to_string()))
}

pub fn load_scenarios(path: Option<&Path>, game: &str) -> Result<(ScenarioFile, String)> {
    let (file, source) = match path {
        Some(p) => {
            let bytes =
                std::fs::read(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            let file = parse_scenarios(&bytes)
                .map_err(|e| usage(format!("{}: {e}", p.display())))?;
            (file, p.display().to_string())
        }
        None => {
            let file = builtin_scenario_file(game)
                .ok_or_else(|| usage(format!("no shipped scenarios for {game}; pass --scenarios")))?;
            (file, format!("builtin:{game}"))
        }
    };
    if file.game != game {
        return Err(usage(format!(
            "scenario file {source} is for {}, not {game}",
            file.game
        )));
    }
    Ok((file, source))
}

fn write_json(path: Option<&Path>, text: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Plain decimal, always with a fractional part.
pub fn decimal(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let t = &args.target;
    let spec = lookup_game(&t.game)?;
    let candidate: Candidate = t.candidate.parse().map_err(core_error)?;
    let (scenarios, source) = load_scenarios(t.scenarios.as_deref(), &spec.name)?;
    let factory = candidate_factory(&candidate, t.seed, &t.adapter.options()?).map_err(core_error)?;
    let cfg = EvalConfig {
        fuzz_n: args.fuzz_n,
        info_n: args.info_n,
        seed: t.seed,
    };
    let start = Instant::now();
    let eval = evaluate(factory.as_ref(), &spec, &scenarios, &cfg).map_err(core_error)?;
    let config = RunConfig {
        seed: t.seed,
        scenarios: source,
        fuzz_n: Some(args.fuzz_n),
        info_n: Some(args.info_n),
        n: None,
        timeout_seconds: None,
    };
    let report = VerificationReport::from_evaluation(
        &spec,
        candidate,
        config,
        eval,
        start.elapsed().as_millis() as u64,
    );
    print_summary(&report)?;
    write_json(t.json.as_deref(), &report.to_json())
}

fn print_summary(r: &VerificationReport) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "game        {}", r.game)?;
    writeln!(out, "candidate   {}", r.candidate)?;
    match &r.load_error {
        None if r.load_ok => writeln!(out, "load        ok")?,
        err => writeln!(out, "load        failed: {}", err.as_deref().unwrap_or("unknown"))?,
    }
    for t in &r.tiers {
        let failed: Vec<&str> = t
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        write!(
            out,
            "{:<12}{:.4}  {}/{}",
            t.tier.name(),
            t.score,
            t.passed_count(),
            t.checks.len()
        )?;
        if failed.is_empty() {
            writeln!(out)?;
        } else {
            writeln!(out, "  failed: {}", failed.join(", "))?;
        }
        for d in t.diagnostics.iter().take(3) {
            writeln!(out, "              {d}")?;
        }
    }
    if let Some(s) = r.stub.as_ref().filter(|s| s.stub) {
        writeln!(out, "stub        {}", s.diagnostic.as_deref().unwrap_or("yes"))?;
    }
    if let Some(m) = r.mean {
        writeln!(out, "mean        {m:.4}")?;
    }
    writeln!(out, "reward      {}", decimal(r.reward.reward))?;
    Ok(())
}

fn cmd_reward(args: RewardArgs) -> Result<()> {
    let t = &args.target;
    let spec = lookup_game(&t.game)?;
    let candidate: Candidate = t.candidate.parse().map_err(core_error)?;
    let (scenarios, source) = load_scenarios(t.scenarios.as_deref(), &spec.name)?;
    let cfg = RewardConfig {
        n: args.n,
        timeout: seconds(args.timeout, "--timeout")?,
        seed: t.seed,
    };
    let factory = candidate_factory(&candidate, t.seed, &t.adapter.options()?).map_err(core_error)?;
    let start = Instant::now();
    let breakdown = compute_reward(factory, &spec, &scenarios, &cfg).map_err(core_error)?;
    let config = RunConfig {
        seed: t.seed,
        scenarios: source,
        fuzz_n: None,
        info_n: None,
        n: Some(args.n),
        timeout_seconds: Some(args.timeout),
    };
    let report = VerificationReport::from_reward(
        &spec,
        candidate,
        config,
        breakdown,
        start.elapsed().as_millis() as u64,
    );
    write_json(t.json.as_deref(), &report.to_json())?;
    let b = &report.reward;
    let mut out = std::io::stdout().lock();
    if b.timed_out {
        writeln!(out, "timed out after {}s", args.timeout)?;
    } else if !b.load_ok {
        writeln!(out, "load        failed: {}", b.load_error.as_deref().unwrap_or("unknown"))?;
    }
    for (tier, score) in &b.tier_scores {
        writeln!(out, "{:<12}{score:.4}  weight {:.4}", tier.name(), b.weights_used[tier])?;
    }
    if b.stub {
        writeln!(out, "stub resampler: information tier forfeited")?;
    }
    writeln!(out, "{}", decimal(b.reward))?;
    Ok(())
}

fn agent(s: &str) -> Result<AgentSpec> {
    s.parse().map_err(|e: SolverError| usage(e.to_string()))
}

fn cmd_play(args: PlayArgs) -> Result<()> {
    let spec = lookup_game(&args.game)?;
    let candidate: Candidate = args.candidate.parse().map_err(core_error)?;
    let agents = [agent(&args.agent0)?, agent(&args.agent1)?];
    for a in &agents {
        a.check_game(&spec).map_err(|e| usage(e.to_string()))?;
    }
    let factory =
        candidate_factory(&candidate, args.seed, &args.adapter.options()?).map_err(core_error)?;
    let report = play_match(factory.as_ref(), &spec, agents, args.games, args.seed)
        .map_err(|e| match e {
            SolverError::Mismatch { .. } | SolverError::BadAgent(_) | SolverError::Config(_) => {
                usage(e.to_string())
            }
            other => anyhow::Error::new(other),
        })?;
    print_match(&report)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_json(args.json.as_deref(), &text)
}

fn print_match(r: &MatchReport) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "game        {}", r.game)?;
    writeln!(out, "agent0      {}", r.agents[0])?;
    writeln!(out, "agent1      {}", r.agents[1])?;
    writeln!(out, "games       {}/{}", r.games_played, r.games_requested)?;
    writeln!(out, "W/D/L       {}/{}/{}", r.wins, r.draws, r.losses)?;
    writeln!(
        out,
        "mean reward {:+.4} {:+.4}",
        r.mean_rewards[0], r.mean_rewards[1]
    )?;
    writeln!(out, "seat wins   {} {}", r.seat_wins[0], r.seat_wins[1])?;
    if r.incomplete {
        writeln!(out, "incomplete: {}", r.error.as_deref().unwrap_or("unknown error"))?;
    }
    Ok(())
}

fn cmd_adapter() -> Result<()> {
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    cwm_core::protocol::serve(stdin, stdout, &cwm_core::candidate::builtin_loader)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Reward(a) => cmd_reward(a),
        Command::Serve(a) => serve::cmd_serve(a),
        Command::Play(a) => cmd_play(a),
        Command::Adapter(_) => cmd_adapter(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_FAULT)
            }
        }
    }
}
