//! Online test algorithms: uniform, greedy, ε-greedy, and MCTS with or
//! without greedy biasing.

mod campaign;
mod mcts;

pub use campaign::{
    experiment_matrix, run_attempt, run_campaign, AlgorithmRow, AttemptReport, CampaignError,
    ExperimentReport, TreeStats,
};
pub use mcts::{uct_score, Edge, IterationOutcome, Mcts, Node, NodeId, SearchTree};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{InputVal, Trace, Valuation};
use crate::analysis::{CoreachInput, InputGraph, RewardLayers};
use crate::automaton::{Machine, Objective, SpecAutomaton, StateId};
use crate::error::SpecError;
use crate::game::{Game, GreedyArtifacts};
use crate::sut::{Sut, SutError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Uniform,
    Greedy,
    EpsGreedy,
    Mcts,
    GreedyMcts,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Uniform,
        Algorithm::Greedy,
        Algorithm::EpsGreedy,
        Algorithm::Mcts,
        Algorithm::GreedyMcts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Uniform => "uniform",
            Algorithm::Greedy => "greedy",
            Algorithm::EpsGreedy => "eps-greedy",
            Algorithm::Mcts => "mcts",
            Algorithm::GreedyMcts => "greedy-mcts",
        }
    }

    pub fn is_mcts(self) -> bool {
        matches!(self, Algorithm::Mcts | Algorithm::GreedyMcts)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| SpecError::invalid(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    Last,
    Discounted,
}

impl FromStr for RewardMode {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(RewardMode::Last),
            "discounted" => Ok(RewardMode::Discounted),
            _ => Err(SpecError::invalid(format!("unknown reward mode `{s}`"))),
        }
    }
}

/// Default UCT constant on the normalized reward scale. One step of progress
/// changes a normalized discounted reward by roughly `1 / ((m+1)·Σγ^i)`, so a
/// large `|c|` turns selection into breadth-first search.
pub const DEFAULT_UCT_C: f64 = -0.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterConfig {
    pub algorithm: Algorithm,
    /// Maximal number of steps per run.
    #[serde(rename = "K")]
    pub k: usize,
    pub runs: usize,
    pub attempts: usize,
    pub epsilon: f64,
    pub gamma: f64,
    /// Visits per tree node during which selection is restricted to greedy inputs.
    #[serde(rename = "M")]
    pub m: u64,
    /// UCT exploration constant; negative because rewards are minimized.
    pub c: f64,
    pub reward: RewardMode,
    pub seed: u64,
    pub continue_after_error: bool,
    /// Roll out with ε-greedy instead of uniform allowed inputs (greedy MCTS only).
    pub greedy_rollout: bool,
}

impl Default for TesterConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Uniform,
            k: 250,
            runs: 3000,
            attempts: 10,
            epsilon: 0.25,
            gamma: 0.99,
            m: 30,
            c: DEFAULT_UCT_C,
            reward: RewardMode::Discounted,
            seed: 0,
            continue_after_error: false,
            greedy_rollout: true,
        }
    }
}

impl TesterConfig {
    /// Row label distinguishing the greedy MCTS variants.
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::GreedyMcts => match (self.m > 0, self.greedy_rollout) {
                (true, true) => "mcts+greedy-tree+rollout".into(),
                (false, true) => "mcts+greedy-rollout".into(),
                (true, false) => "mcts+greedy-tree".into(),
                (false, false) => "mcts".into(),
            },
            a => a.name().into(),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: &str| Err(SpecError::invalid(m));
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie strictly between 0 and 1");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie strictly between 0 and 1");
        }
        if self.c >= 0.0 || self.c.is_nan() {
            return bad("the UCT constant c must be negative");
        }
        Ok(())
    }
}

/// Classification of a run by its end state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Covering,
    Error,
    CoveringError,
    Inconclusive,
    Active,
}

impl Verdict {
    pub fn covers(self) -> bool {
        matches!(self, Verdict::Covering | Verdict::CoveringError)
    }

    pub fn fails(self) -> bool {
        matches!(self, Verdict::Error | Verdict::CoveringError)
    }
}

/// Everything a tester needs about the requirement, computed once and
/// shared read-only between attempts.
#[derive(Debug, Clone)]
pub struct TestContext {
    pub automaton: SpecAutomaton,
    pub machine: Machine,
    pub objective: BTreeSet<StateId>,
    objective_mask: Vec<bool>,
    pub coreach: CoreachInput,
    pub layers: RewardLayers,
    pub greedy: GreedyArtifacts,
}

impl TestContext {
    /// Requires a complete deterministic automaton.
    pub fn new(automaton: &SpecAutomaton, objective: &Objective) -> Result<Self, SpecError> {
        let report = automaton.validate();
        if let Some(w) = report.incomplete.first() {
            return Err(SpecError::invalid(format!(
                "automaton is incomplete at {} on {}; complete it first",
                w.state, w.valuation
            )));
        }
        let machine = Machine::new(automaton)?;
        let graph = InputGraph::new(&machine);
        let coreach = graph.coreach_inp(&objective.states);
        let layers = graph.reward_layers(&objective.states);
        let greedy = Game::new(&graph, &objective.states).greedy(machine.initial());
        let mut objective_mask = vec![false; machine.num_states()];
        for &s in &objective.states {
            objective_mask[s] = true;
        }
        Ok(Self {
            automaton: automaton.clone(),
            machine,
            objective: objective.states.clone(),
            objective_mask,
            coreach,
            layers,
            greedy,
        })
    }

    /// Covering and error first, then inconclusive, then active.
    pub fn classify(&self, s: StateId) -> Verdict {
        match (self.objective_mask[s], self.machine.is_error(s)) {
            (true, true) => Verdict::CoveringError,
            (true, false) => Verdict::Covering,
            (false, true) => Verdict::Error,
            _ if !self.coreach.contains(s) => Verdict::Inconclusive,
            _ => Verdict::Active,
        }
    }

    /// Advances the requirement on one observed valuation.
    pub fn advance(&self, s: StateId, v: Valuation) -> StateId {
        self.machine
            .step(s, v)
            .expect("test contexts are built from complete automata")
    }
}

/// How a run picks its next input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Uniform among inputs that keep the run coreachable.
    Uniform,
    /// Uniform inside the greedy strategy.
    Greedy,
    /// Per step: uniform with probability ε, greedy otherwise.
    EpsGreedy(f64),
}

impl Policy {
    pub fn pool<'a>(self, ctx: &'a TestContext, s: StateId, rng: &mut impl Rng) -> &'a [InputVal] {
        match self {
            Policy::Uniform => ctx.coreach.allowed(s),
            Policy::Greedy => ctx.greedy.pool(s),
            Policy::EpsGreedy(eps) => {
                if rng.gen::<f64>() < eps {
                    ctx.coreach.allowed(s)
                } else {
                    ctx.greedy.pool(s)
                }
            }
        }
    }

    pub fn choose(self, ctx: &TestContext, s: StateId, rng: &mut impl Rng) -> InputVal {
        let pool = self.pool(ctx, s, rng);
        pool[rng.gen_range(0..pool.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub trace: Trace,
    pub end: StateId,
}

/// One run: reset, then step while active and fewer than `k` steps were made.
pub fn run_once<S: Sut + ?Sized>(
    ctx: &TestContext,
    sut: &mut S,
    policy: Policy,
    k: usize,
    rng: &mut impl Rng,
) -> Result<RunOutcome, SutError> {
    sut.reset()?;
    let mut s = ctx.machine.initial();
    let mut trace = Vec::new();
    let mut verdict = ctx.classify(s);
    while verdict == Verdict::Active && trace.len() < k {
        let input = policy.choose(ctx, s, rng);
        let output = sut.step(input)?;
        let v = Valuation::new(input, output);
        s = ctx.advance(s, v);
        trace.push(v);
        verdict = ctx.classify(s);
    }
    Ok(RunOutcome {
        verdict,
        trace,
        end: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::CompletionPolicy;
    use crate::bundled::load_completed;
    use crate::sut::SutSource;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig1() -> TestContext {
        let spec = load_completed("fig1", CompletionPolicy::ToError).unwrap();
        TestContext::new(&spec.automaton, spec.objective("o").unwrap()).unwrap()
    }

    #[test]
    fn classify_examples() {
        let ctx = fig1();
        let id = |n| ctx.machine.state_id(n).unwrap();
        assert_eq!(ctx.classify(id("o")), Verdict::Covering);
        assert_eq!(ctx.classify(id("t")), Verdict::Error);
        assert_eq!(ctx.classify(id("s1")), Verdict::Active);
    }

    #[test]
    fn greedy_on_i1_covers_in_two_steps() {
        let ctx = fig1();
        let mut sut = SutSource::parse("builtin:i1")
            .unwrap()
            .open(ctx.machine.alphabet())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut covered = 0;
        for _ in 0..200 {
            let r = run_once(&ctx, &mut sut, Policy::Greedy, 10, &mut rng).unwrap();
            if r.verdict.covers() {
                covered += 1;
                assert!(r.trace.len() >= 2);
            }
        }
        assert!(covered > 0);
    }

    #[test]
    fn config_rejects_bad_parameters() {
        let mut cfg = TesterConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.c = 0.5;
        assert!(cfg.validate().is_err());
        cfg = TesterConfig {
            epsilon: 1.0,
            ..TesterConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
