//! Attempts and campaigns: repeated runs until a covering or failing trace
//! is found, with reports.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::Valuation;
use crate::sut::{SutError, SutSource};

use super::{run_once, Algorithm, Mcts, Policy, TestContext, TesterConfig, Verdict};

/// At most this many distinct failing traces are kept per attempt.
pub const MAX_ERROR_TRACES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub success: bool,
    pub runs_used: usize,
    pub covering_trace: Option<Vec<String>>,
    pub error_traces: Vec<Vec<String>>,
    pub wall_time_ms: Option<u64>,
    pub tree: Option<TreeStats>,
    pub transport_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRow {
    pub label: String,
    pub algorithm: Algorithm,
    pub attempts: usize,
    pub successes: usize,
    /// Percentage of attempts that found a covering or failing trace.
    pub success_rate: f64,
    /// Mean runs over successful attempts only.
    pub average_runs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: String,
    pub objective: String,
    pub sut: String,
    pub configs: Vec<TesterConfig>,
    pub rows: Vec<AlgorithmRow>,
    pub attempts: Vec<AttemptReport>,
}

impl ExperimentReport {
    pub fn transport_failures(&self) -> usize {
        self.attempts
            .iter()
            .filter(|a| a.transport_error.is_some())
            .count()
    }

    pub fn any_success(&self) -> bool {
        self.rows.iter().any(|r| r.successes > 0)
    }

    /// Table with one line per algorithm.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{:<26} {:>12} {:>13}\n",
            "algorithm", "success rate", "average runs"
        );
        for r in &self.rows {
            let avg = r
                .average_runs
                .map_or("-".to_string(), |a| format!("{a:.1}"));
            out.push_str(&format!(
                "{:<26} {:>11.1}% {:>13}\n",
                r.label, r.success_rate, avg
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CampaignError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("self-audit failed: {0}")]
    Audit(String),
}

/// Runs one attempt with seed `cfg.seed + index`, opening a fresh SUT session.
pub fn run_attempt(
    ctx: &TestContext,
    source: &SutSource,
    cfg: &TesterConfig,
    index: usize,
    timing: bool,
) -> AttemptReport {
    let seed = cfg.seed.wrapping_add(index as u64);
    let started = Instant::now();
    let mut report = AttemptReport {
        algorithm: cfg.algorithm,
        seed,
        success: false,
        runs_used: 0,
        covering_trace: None,
        error_traces: Vec::new(),
        wall_time_ms: None,
        tree: None,
        transport_error: None,
    };
    let result = attempt_body(ctx, source, cfg, seed, &mut report);
    if let Err(e) = result {
        report.transport_error = Some(e.to_string());
    }
    if timing {
        report.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    }
    report
}

fn attempt_body(
    ctx: &TestContext,
    source: &SutSource,
    cfg: &TesterConfig,
    seed: u64,
    report: &mut AttemptReport,
) -> Result<(), SutError> {
    let mut sut = source.open(ctx.machine.alphabet())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = ctx.machine.alphabet().clone();
    let mut seen_errors: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut record = |verdict: Verdict, trace: &[Valuation], report: &mut AttemptReport| -> bool {
        let text = alphabet.format_trace(trace);
        if verdict.fails() {
            report.success = true;
            if report.error_traces.len() < MAX_ERROR_TRACES && seen_errors.insert(text.clone()) {
                report.error_traces.push(text.clone());
            }
        }
        if verdict.covers() {
            report.success = true;
            report.covering_trace = Some(text);
            return true;
        }
        verdict.fails() && !cfg.continue_after_error
    };

    if cfg.algorithm.is_mcts() {
        let mut mcts = Mcts::new(ctx, cfg, cfg.algorithm == Algorithm::GreedyMcts);
        for run in 1..=cfg.runs {
            let out = mcts.iterate(&mut sut, &mut rng);
            report.runs_used = run;
            report.tree = Some(TreeStats {
                nodes: mcts.tree.nodes.len(),
                max_depth: mcts.tree.max_depth(),
            });
            let out = out?;
            if record(out.verdict, &out.trace, report) {
                break;
            }
        }
    } else {
        let policy = match cfg.algorithm {
            Algorithm::Uniform => Policy::Uniform,
            Algorithm::Greedy => Policy::Greedy,
            _ => Policy::EpsGreedy(cfg.epsilon),
        };
        for run in 1..=cfg.runs {
            report.runs_used = run;
            let out = run_once(ctx, &mut sut, policy, cfg.k, &mut rng)?;
            if record(out.verdict, &out.trace, report) {
                break;
            }
        }
    }
    Ok(())
}

/// Re-runs every reported trace on the requirement automaton.
fn audit(ctx: &TestContext, a: &AttemptReport) -> Result<(), CampaignError> {
    let alphabet = ctx.automaton.alphabet();
    let run = |trace: &[String]| -> Result<(usize, bool), CampaignError> {
        let vals: Result<Vec<_>, _> = trace
            .iter()
            .map(|b| alphabet.parse_valuation_bits(b))
            .collect();
        let vals = vals.map_err(|e| CampaignError::Audit(e.to_string()))?;
        ctx.automaton
            .run_trace(&vals)
            .map_err(|e| CampaignError::Audit(e.to_string()))
    };
    if let Some(t) = &a.covering_trace {
        let (end, _) = run(t)?;
        if !ctx.objective.contains(&end) {
            return Err(CampaignError::Audit(format!(
                "covering trace of seed {} ends in {}",
                a.seed,
                ctx.automaton.name(end)
            )));
        }
    }
    for t in &a.error_traces {
        let (end, fails) = run(t)?;
        if !fails {
            return Err(CampaignError::Audit(format!(
                "error trace of seed {} ends in non-error state {}",
                a.seed,
                ctx.automaton.name(end)
            )));
        }
    }
    Ok(())
}

/// The comparison matrix: uniform, ε-greedy, basic MCTS, MCTS with greedy
/// roll-out only, and MCTS with greedy tree and roll-out, all sharing `base`.
pub fn experiment_matrix(base: &TesterConfig) -> Vec<TesterConfig> {
    let with = |algorithm, m| TesterConfig {
        algorithm,
        m,
        greedy_rollout: true,
        ..base.clone()
    };
    vec![
        with(Algorithm::Uniform, base.m),
        with(Algorithm::EpsGreedy, base.m),
        with(Algorithm::Mcts, base.m),
        with(Algorithm::GreedyMcts, 0),
        with(Algorithm::GreedyMcts, base.m),
    ]
}

/// Runs `cfg.attempts` attempts of every configuration on `jobs` threads.
/// Results do not depend on `jobs`.
pub fn run_campaign(
    ctx: &TestContext,
    source: &SutSource,
    configs: &[TesterConfig],
    jobs: usize,
    timing: bool,
    labels: (&str, &str),
) -> Result<ExperimentReport, CampaignError> {
    for cfg in configs {
        cfg.validate()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
    }
    let tasks: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(c, cfg)| (0..cfg.attempts).map(move |i| (c, i)))
        .collect();
    let run = |&(c, i): &(usize, usize)| run_attempt(ctx, source, &configs[c], i, timing);
    let attempts: Vec<AttemptReport> = if jobs <= 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };
    for a in &attempts {
        audit(ctx, a)?;
    }
    let mut rows = Vec::new();
    let mut offset = 0;
    for cfg in configs {
        let chunk = &attempts[offset..offset + cfg.attempts];
        offset += cfg.attempts;
        let wins: Vec<&AttemptReport> = chunk.iter().filter(|a| a.success).collect();
        rows.push(AlgorithmRow {
            label: cfg.label(),
            algorithm: cfg.algorithm,
            attempts: cfg.attempts,
            successes: wins.len(),
            success_rate: if cfg.attempts == 0 {
                0.0
            } else {
                100.0 * wins.len() as f64 / cfg.attempts as f64
            },
            average_runs: (!wins.is_empty())
                .then(|| wins.iter().map(|a| a.runs_used as f64).sum::<f64>() / wins.len() as f64),
        });
    }
    Ok(ExperimentReport {
        spec: labels.0.to_string(),
        objective: labels.1.to_string(),
        sut: source.uri(),
        configs: configs.to_vec(),
        rows,
        attempts,
    })
}
