//! `otsynth`: validate and analyze requirement automata, run test campaigns
//! against builtin or external SUTs, and serve builtin SUTs over stdio.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use otsynth_core::analysis::{summary_json, InputGraph};
use otsynth_core::bundled::load_spec;
use otsynth_core::game::{strategy_from_json, strategy_json, Game};
use otsynth_core::sut::{serve, SutSource};
use otsynth_core::testers::{
    experiment_matrix, run_campaign, Algorithm, ExperimentReport, RewardMode, TestContext,
    TesterConfig, DEFAULT_UCT_C,
};
use otsynth_core::{CompletionPolicy, Machine, Objective, SpecFile};

#[derive(Parser)]
#[command(
    name = "otsynth",
    version,
    about = "Online black-box test synthesis from safety automata"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check completeness, determinism and absorbing error states.
    Validate {
        /// Spec file or bundled name.
        spec: String,
        /// Complete the automaton before validating.
        #[arg(long, value_name = "POLICY")]
        complete: Option<CompletionPolicy>,
    },
    /// Print coreachability, reward layers and optionally the greedy game as JSON.
    Analyze {
        #[command(flatten)]
        target: Target,
        /// Include W_i, Coop_i, ranks and the greedy strategy.
        #[arg(long)]
        game: bool,
        /// Write the greedy strategy to a standalone JSON file.
        #[arg(long, value_name = "PATH")]
        strategy_out: Option<PathBuf>,
    },
    /// Run a test campaign with one algorithm.
    Run(RunArgs),
    /// Run the comparison matrix of all algorithms on one SUT.
    Experiment(ExperimentArgs),
    /// Serve a builtin SUT on stdin/stdout using the line protocol.
    Serve {
        /// Builtin SUT URI, e.g. builtin:passageway-bug.
        uri: String,
    },
}

#[derive(Args, Clone)]
struct Target {
    /// Spec file or bundled name (fig1, fig5, carriage, i1, fig6, passageway, passageway:N).
    #[arg(long)]
    spec: String,
    /// Objective name; defaults to the first objective in the spec.
    #[arg(long)]
    objective: Option<String>,
    /// Complete the automaton first (to-error or self-loop).
    #[arg(long, value_name = "POLICY")]
    complete: Option<CompletionPolicy>,
}

#[derive(Args, Clone)]
struct Campaign {
    #[command(flatten)]
    target: Target,
    /// builtin:NAME or exec:COMMAND.
    #[arg(long)]
    sut: String,
    #[arg(long = "K", default_value_t = 250)]
    k: usize,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    attempts: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// UCT exploration constant (negative).
    #[arg(long, default_value_t = DEFAULT_UCT_C, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, default_value = "discounted")]
    reward: RewardMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for attempts; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the full report as JSON.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Keep searching for a covering trace after an error trace.
    #[arg(long)]
    continue_after_error: bool,
    /// 50 attempts of 10000 runs instead of 10 of 3000.
    #[arg(long)]
    paper_scale: bool,
    /// Record wall time per attempt (makes reports non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Greedy strategy file written by `analyze --strategy-out`.
    #[arg(long, value_name = "PATH")]
    strategy: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    campaign: Campaign,
    #[arg(long = "algo")]
    algorithm: Algorithm,
    /// Visits per node restricted to greedy inputs (greedy-mcts).
    #[arg(long = "M", alias = "greedy-tree", default_value_t = 30)]
    m: u64,
    /// Roll out ε-greedily (greedy-mcts).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    greedy_rollout: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    campaign: Campaign,
    #[arg(long = "M", default_value_t = 30)]
    m: u64,
}

/// Errors mapped to exit code 2.
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| UsageError(e).into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Validate { spec, complete } => validate(&spec, complete),
        Command::Analyze {
            target,
            game,
            strategy_out,
        } => analyze(&target, game, strategy_out),
        Command::Run(args) => {
            let mut cfg = base_config(&args.campaign);
            cfg.algorithm = args.algorithm;
            cfg.m = args.m;
            cfg.greedy_rollout = args.greedy_rollout;
            campaign(&args.campaign, vec![cfg])
        }
        Command::Experiment(args) => {
            let base = TesterConfig {
                m: args.m,
                ..base_config(&args.campaign)
            };
            let configs = experiment_matrix(&base);
            campaign(&args.campaign, configs)
        }
        Command::Serve { uri } => {
            let source = usage(SutSource::parse(&uri).map_err(Into::into))?;
            let mut sut = usage(source.open_builtin().map_err(Into::into))?;
            let stdin = io::stdin();
            serve(&mut sut, BufReader::new(stdin.lock()), io::stdout().lock())?;
            Ok(0)
        }
    }
}

fn load(target_spec: &str, complete: Option<CompletionPolicy>) -> Result<SpecFile> {
    let spec =
        usage(load_spec(target_spec).with_context(|| format!("cannot load spec `{target_spec}`")))?;
    match complete {
        None => Ok(spec),
        Some(policy) => Ok(SpecFile {
            automaton: usage(spec.automaton.complete(policy).map_err(Into::into))?,
            objectives: spec.objectives,
        }),
    }
}

fn objective<'a>(spec: &'a SpecFile, name: Option<&str>) -> Result<&'a Objective> {
    let found = match name {
        Some(n) => spec.objective(n).ok(),
        None => spec.objectives.first(),
    };
    found.ok_or_else(|| {
        let known: Vec<&str> = spec.objectives.iter().map(|o| o.name.as_str()).collect();
        UsageError(anyhow::anyhow!(
            "unknown objective `{}`; the spec defines [{}]",
            name.unwrap_or(""),
            known.join(", ")
        ))
        .into()
    })
}

fn validate(spec: &str, complete: Option<CompletionPolicy>) -> Result<u8> {
    let spec = load(spec, complete)?;
    let report = spec.automaton.validate();
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(w) = report.incomplete.first() {
        eprintln!(
            "incomplete: no transition from {} on {}",
            w.state, w.valuation
        );
    }
    if let Some(w) = report.nondeterministic.first() {
        eprintln!(
            "nondeterministic: several transitions from {} on {}",
            w.state, w.valuation
        );
    }
    if let Some(s) = report.leaking_errors.first() {
        eprintln!("error state {s} is not absorbing");
    }
    Ok(if report.ok() { 0 } else { 1 })
}

fn analyze(target: &Target, game: bool, strategy_out: Option<PathBuf>) -> Result<u8> {
    let spec = load(&target.spec, target.complete)?;
    let obj = objective(&spec, target.objective.as_deref())?;
    let m = usage(Machine::new(&spec.automaton).map_err(Into::into))?;
    let mut out = summary_json(&m, &obj.states);
    if out["empty_objective"] == json!(true) {
        eprintln!(
            "warning: objective `{}` is empty; every state is in the sink layer",
            obj.name
        );
    }
    out["objective"] = json!(obj.name);
    if game || strategy_out.is_some() {
        let graph = InputGraph::new(&m);
        let artifacts = Game::new(&graph, &obj.states).greedy(m.initial());
        if game {
            out["game"] = artifacts.to_json(&m);
        }
        if let Some(path) = strategy_out {
            let text = serde_json::to_string_pretty(&strategy_json(&m, &artifacts.strategy))?;
            fs::write(&path, text + "\n")
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn base_config(c: &Campaign) -> TesterConfig {
    let (attempts, runs) = if c.paper_scale {
        (50, 10_000)
    } else {
        (10, 3000)
    };
    TesterConfig {
        algorithm: Algorithm::Uniform,
        k: c.k,
        runs: c.runs.unwrap_or(runs),
        attempts: c.attempts.unwrap_or(attempts),
        epsilon: c.epsilon,
        gamma: c.gamma,
        c: c.c,
        reward: c.reward,
        seed: c.seed,
        continue_after_error: c.continue_after_error,
        ..TesterConfig::default()
    }
}

fn campaign(c: &Campaign, configs: Vec<TesterConfig>) -> Result<u8> {
    for cfg in &configs {
        usage(cfg.validate().map_err(Into::into))?;
    }
    if c.jobs == 0 {
        bail!(UsageError(anyhow::anyhow!("--jobs must be at least 1")));
    }
    let spec = load(&c.target.spec, c.target.complete)?;
    let obj = objective(&spec, c.target.objective.as_deref())?;
    let mut ctx = usage(TestContext::new(&spec.automaton, obj).map_err(Into::into))?;
    if let Some(path) = &c.strategy {
        let text = usage(
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())),
        )?;
        let value: serde_json::Value = usage(serde_json::from_str(&text).map_err(Into::into))?;
        let st = usage(strategy_from_json(&ctx.machine, &value).map_err(Into::into))?;
        ctx.greedy = ctx.greedy.clone().with_strategy(st);
    }
    let source = usage(SutSource::parse(&c.sut).map_err(Into::into))?;
    let report = usage(
        run_campaign(
            &ctx,
            &source,
            &configs,
            c.jobs,
            c.timing,
            (&c.target.spec, &obj.name),
        )
        .map_err(Into::into),
    )?;
    print_summary(&report);
    if let Some(path) = &c.report {
        let text = serde_json::to_string_pretty(&report)?;
        fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(exit_code(&report))
}

fn print_summary(report: &ExperimentReport) {
    let mut out = io::stdout().lock();
    let _ = write!(out, "{}", report.summary());
    for a in &report.attempts {
        if let Some(e) = &a.transport_error {
            eprintln!("attempt with seed {} ({}): {e}", a.seed, a.algorithm);
        }
    }
    if let Some(a) = report.attempts.iter().find(|a| !a.error_traces.is_empty()) {
        let _ = writeln!(
            out,
            "first failing trace (seed {}): {}",
            a.seed,
            a.error_traces[0].join(" ")
        );
    }
}

fn exit_code(report: &ExperimentReport) -> u8 {
    if report.transport_failures() > 0 {
        3
    } else if report.any_success() {
        0
    } else {
        1
    }
}
