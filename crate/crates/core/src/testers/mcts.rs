//! Monte Carlo tree search over input sequences.
//!
//! Tree nodes are identified with input sequences from the reset state,
//! which is sound for output-deterministic SUTs. Rewards are minimized:
//! lower is closer to the objective. They are normalized to `[0, 1]` before
//! entering the UCT averages.

use rand::Rng;

use crate::alphabet::{InputVal, Trace, Valuation};
use crate::analysis::discounted_reward;
use crate::automaton::StateId;
use crate::sut::{Sut, SutError};

use super::{Policy, RewardMode, TestContext, TesterConfig, Verdict};

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Edge {
    pub input: InputVal,
    pub child: NodeId,
    pub visits: u64,
    /// Arithmetic mean of the normalized rewards propagated through this edge.
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub state: StateId,
    pub depth: usize,
    /// One on creation plus one per selection pass through the node.
    pub visits: u64,
    pub verdict: Verdict,
    /// Children sorted by input.
    pub edges: Vec<Edge>,
}

impl Node {
    pub fn is_terminal(&self) -> bool {
        self.verdict != Verdict::Active
    }
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<Node>,
}

impl SearchTree {
    pub fn new(root_state: StateId, verdict: Verdict) -> Self {
        Self {
            nodes: vec![Node {
                state: root_state,
                depth: 0,
                visits: 0,
                verdict,
                edges: Vec::new(),
            }],
        }
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    fn edge_index(&self, node: NodeId, input: InputVal) -> Result<usize, usize> {
        self.nodes[node]
            .edges
            .binary_search_by_key(&input, |e| e.input)
    }
}

/// `r_i + c·sqrt(ln n / n_i)`; an unvisited child scores `-∞` so it is tried first.
pub fn uct_score(mean: f64, n: f64, n_i: u64, c: f64) -> f64 {
    if n_i == 0 {
        return f64::NEG_INFINITY;
    }
    mean + c * (n.ln() / n_i as f64).sqrt()
}

/// Result of one selection/expansion/simulation/propagation pass.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub verdict: Verdict,
    pub trace: Trace,
    /// Tree edges traversed, as (parent node, input).
    pub path: Vec<(NodeId, InputVal)>,
    /// Normalized reward propagated along `path`.
    pub reward: f64,
}

pub struct Mcts<'c> {
    ctx: &'c TestContext,
    k: usize,
    c: f64,
    m: u64,
    greedy_tree: bool,
    rollout: Policy,
    reward: RewardMode,
    gamma: f64,
    pub tree: SearchTree,
}

impl<'c> Mcts<'c> {
    /// Basic MCTS rolls out uniformly over allowed inputs; greedy MCTS
    /// restricts selection to greedy inputs for the first `M` visits of each
    /// node (when `M > 0`) and rolls out ε-greedily when `greedy_rollout` is set.
    pub fn new(ctx: &'c TestContext, cfg: &TesterConfig, greedy: bool) -> Self {
        let root = ctx.machine.initial();
        Self {
            ctx,
            k: cfg.k,
            c: cfg.c,
            m: cfg.m,
            greedy_tree: greedy && cfg.m > 0,
            rollout: if greedy && cfg.greedy_rollout {
                Policy::EpsGreedy(cfg.epsilon)
            } else {
                Policy::Uniform
            },
            reward: cfg.reward,
            gamma: cfg.gamma,
            tree: SearchTree::new(root, ctx.classify(root)),
        }
    }

    /// Candidate inputs at a node given its visit count before this pass.
    pub fn candidates(&self, node: NodeId) -> &'c [InputVal] {
        let n = &self.tree.nodes[node];
        if self.greedy_tree && n.visits < self.m {
            self.ctx.greedy.pool(n.state)
        } else {
            self.ctx.coreach.allowed(n.state)
        }
    }

    pub fn iterate<S: Sut + ?Sized>(
        &mut self,
        sut: &mut S,
        rng: &mut impl Rng,
    ) -> Result<IterationOutcome, SutError> {
        sut.reset()?;
        let mut trace: Trace = Vec::new();
        let mut path = Vec::new();
        let mut rewards: Vec<u32> = Vec::new();
        let mut node = 0;

        // Selection and expansion.
        loop {
            let pool = self.candidates(node);
            self.tree.nodes[node].visits += 1;
            let n = &self.tree.nodes[node];
            if n.is_terminal() || n.depth >= self.k || pool.is_empty() {
                break;
            }
            let untried: Vec<InputVal> = pool
                .iter()
                .copied()
                .filter(|&i| self.tree.edge_index(node, i).is_err())
                .collect();
            if !untried.is_empty() {
                let input = untried[rng.gen_range(0..untried.len())];
                let s = self.step(sut, node, input, &mut trace, &mut rewards)?;
                let child = self.tree.nodes.len();
                let depth = n.depth + 1;
                self.tree.nodes.push(Node {
                    state: s,
                    depth,
                    visits: 1,
                    verdict: self.ctx.classify(s),
                    edges: Vec::new(),
                });
                let at = self.tree.edge_index(node, input).unwrap_err();
                self.tree.nodes[node].edges.insert(
                    at,
                    Edge {
                        input,
                        child,
                        visits: 0,
                        mean: 0.0,
                    },
                );
                path.push((node, input));
                node = child;
                break;
            }
            let total = n.visits;
            let mut best: Option<(f64, usize)> = None;
            for (idx, e) in n.edges.iter().enumerate() {
                if pool.binary_search(&e.input).is_err() {
                    continue;
                }
                let score = uct_score(e.mean, total as f64, e.visits, self.c);
                if best.is_none_or(|(b, _)| score < b) {
                    best = Some((score, idx));
                }
            }
            let (_, idx) = best.expect("a fully expanded node has a candidate child");
            let Edge { input, child, .. } = self.tree.nodes[node].edges[idx];
            let s = self.step(sut, node, input, &mut trace, &mut rewards)?;
            if s != self.tree.nodes[child].state {
                return Err(SutError::Protocol(
                    "replaying the same inputs produced different outputs; the SUT is not output-deterministic".into(),
                ));
            }
            path.push((node, input));
            node = child;
        }

        // Simulation.
        let mut s = self.tree.nodes[node].state;
        let mut verdict = self.ctx.classify(s);
        while verdict == Verdict::Active && trace.len() < self.k {
            let input = self.rollout.choose(self.ctx, s, rng);
            let output = sut.step(input)?;
            let v = Valuation::new(input, output);
            s = self.ctx.advance(s, v);
            trace.push(v);
            rewards.push(self.ctx.layers.last_reward(s));
            verdict = self.ctx.classify(s);
        }

        // Propagation.
        let reward = self.normalized_reward(&mut rewards);
        for &(parent, input) in &path {
            let idx = self.tree.edge_index(parent, input).expect("edge on path");
            let e = &mut self.tree.nodes[parent].edges[idx];
            e.visits += 1;
            e.mean += (reward - e.mean) / e.visits as f64;
        }
        Ok(IterationOutcome {
            verdict,
            trace,
            path,
            reward,
        })
    }

    fn step<S: Sut + ?Sized>(
        &self,
        sut: &mut S,
        node: NodeId,
        input: InputVal,
        trace: &mut Trace,
        rewards: &mut Vec<u32>,
    ) -> Result<StateId, SutError> {
        let output = sut.step(input)?;
        let v = Valuation::new(input, output);
        let s = self.ctx.advance(self.tree.nodes[node].state, v);
        trace.push(v);
        rewards.push(self.ctx.layers.last_reward(s));
        Ok(s)
    }

    /// Pads rewards to `K` with the last one and normalizes to `[0, 1]`.
    fn normalized_reward(&self, rewards: &mut Vec<u32>) -> f64 {
        let scale = self.ctx.layers.sink_index() as f64;
        if rewards.is_empty() {
            rewards.push(self.ctx.layers.last_reward(self.tree.nodes[0].state));
        }
        match self.reward {
            RewardMode::Last => *rewards.last().expect("non-empty") as f64 / scale,
            RewardMode::Discounted => {
                let last = *rewards.last().expect("non-empty");
                rewards.resize(self.k.max(rewards.len()), last);
                let max = scale * scale * (1.0 - self.gamma.powi(rewards.len() as i32))
                    / (1.0 - self.gamma);
                discounted_reward(rewards, self.gamma) / max
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uct_examples() {
        assert!((uct_score(2.0, std::f64::consts::E, 1, -1.0) - 1.0).abs() < 1e-12);
        assert_eq!(uct_score(0.7, 10.0, 3, 0.0), 0.7);
        assert_eq!(uct_score(0.7, 10.0, 0, -1.0), f64::NEG_INFINITY);
    }
}
