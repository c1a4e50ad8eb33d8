//! Reachability fixpoints, coreachable inputs and reward layers.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::alphabet::InputVal;
use crate::automaton::{Machine, StateId};

/// Explicit input-state graph: for each input state and input valuation,
/// the sorted set of input states reachable in one step over all outputs.
#[derive(Debug, Clone)]
pub struct InputGraph {
    num_states: usize,
    input_states: Vec<StateId>,
    is_input: Vec<bool>,
    error: Vec<bool>,
    in_space: usize,
    /// `succ[s * in_space + i]`, empty for output states and undefined inputs.
    succ: Vec<Vec<StateId>>,
    /// Input-state predecessors of each state, over all inputs.
    pred: Vec<Vec<StateId>>,
}

impl InputGraph {
    pub fn new(m: &Machine) -> Self {
        let n = m.num_states();
        let in_space = m.alphabet().input_space() as usize;
        let mut succ = vec![Vec::new(); n * in_space];
        let mut pred: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); n];
        for &s in m.input_states() {
            for i in m.alphabet().all_inputs() {
                let Some(o) = m.input_step(s, i) else {
                    continue;
                };
                let mut targets: Vec<StateId> = m
                    .alphabet()
                    .all_outputs()
                    .filter_map(|v| m.output_step(o, v))
                    .collect();
                targets.sort_unstable();
                targets.dedup();
                for &t in &targets {
                    pred[t].insert(s);
                }
                succ[s * in_space + i.0 as usize] = targets;
            }
        }
        Self {
            num_states: n,
            input_states: m.input_states().to_vec(),
            is_input: (0..n).map(|s| m.is_input(s)).collect(),
            error: (0..n).map(|s| m.is_error(s)).collect(),
            in_space,
            succ,
            pred: pred.into_iter().map(|p| p.into_iter().collect()).collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn input_states(&self) -> &[StateId] {
        &self.input_states
    }

    pub fn is_input(&self, s: StateId) -> bool {
        self.is_input[s]
    }

    pub fn is_error(&self, s: StateId) -> bool {
        self.error[s]
    }

    pub fn error_states(&self) -> BTreeSet<StateId> {
        self.input_states
            .iter()
            .copied()
            .filter(|&s| self.error[s])
            .collect()
    }

    pub fn input_space(&self) -> usize {
        self.in_space
    }

    pub fn inputs(&self) -> impl Iterator<Item = InputVal> {
        (0..self.in_space as u32).map(InputVal)
    }

    /// Input states reachable from `s` in one step reading input `i`.
    #[inline]
    pub fn succ(&self, s: StateId, i: InputVal) -> &[StateId] {
        &self.succ[s * self.in_space + i.0 as usize]
    }

    pub fn pred(&self, s: StateId) -> &[StateId] {
        &self.pred[s]
    }

    fn mask(&self, set: &BTreeSet<StateId>) -> Vec<bool> {
        let mut m = vec![false; self.num_states];
        for &s in set {
            m[s] = true;
        }
        m
    }

    fn unmask(m: &[bool]) -> BTreeSet<StateId> {
        m.iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(s, _)| s)
            .collect()
    }

    /// `{s | ∃ν. post(s, ν) ∩ B ≠ ∅}`.
    pub fn pre(&self, b: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        b.iter()
            .flat_map(|&t| self.pred[t].iter().copied())
            .collect()
    }

    /// `⋃ν post(s, ν)` over `s ∈ B`.
    pub fn post(&self, b: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        b.iter()
            .filter(|&&s| self.is_input[s])
            .flat_map(|&s| {
                (0..self.in_space)
                    .flat_map(move |i| self.succ[s * self.in_space + i].iter().copied())
            })
            .collect()
    }

    /// Least fixpoint of `X ↦ B ∪ Pre(X)` by Kleene iteration.
    pub fn pre_star(&self, b: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        let mut x = self.mask(b);
        loop {
            let mut next = x.clone();
            for &s in &self.input_states {
                if next[s] {
                    continue;
                }
                let hit = (0..self.in_space)
                    .any(|i| self.succ[s * self.in_space + i].iter().any(|&t| x[t]));
                if hit {
                    next[s] = true;
                }
            }
            if next == x {
                return Self::unmask(&x);
            }
            x = next;
        }
    }

    /// Least fixpoint of `X ↦ B ∪ Post(X)` by Kleene iteration.
    pub fn post_star(&self, b: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        let mut x = self.mask(b);
        loop {
            let mut next = x.clone();
            for &s in &self.input_states {
                if !x[s] {
                    continue;
                }
                for i in 0..self.in_space {
                    for &t in &self.succ[s * self.in_space + i] {
                        next[t] = true;
                    }
                }
            }
            if next == x {
                return Self::unmask(&x);
            }
            x = next;
        }
    }

    pub fn coreach_inp(&self, objective: &BTreeSet<StateId>) -> CoreachInput {
        let coreach = self.pre_star(objective);
        let mask = self.mask(&coreach);
        let allowed = (0..self.num_states)
            .map(|s| {
                if !self.is_input[s] {
                    return Vec::new();
                }
                self.inputs()
                    .filter(|&i| self.succ(s, i).iter().any(|&t| mask[t]))
                    .collect()
            })
            .collect();
        CoreachInput {
            coreach,
            in_coreach: mask,
            allowed,
        }
    }

    /// Distance layers towards `objective`.
    pub fn reward_layers(&self, objective: &BTreeSet<StateId>) -> RewardLayers {
        let mut seen = self.mask(objective);
        let mut layers = vec![objective.clone()];
        loop {
            let prev = layers.last().expect("non-empty");
            let next: BTreeSet<StateId> =
                self.pre(prev).into_iter().filter(|&s| !seen[s]).collect();
            if next.is_empty() {
                break;
            }
            for &s in &next {
                seen[s] = true;
            }
            layers.push(next);
        }
        let sink_index = layers.len() as u32;
        let mut index = vec![sink_index; self.num_states];
        for (k, layer) in layers.iter().enumerate() {
            for &s in layer {
                index[s] = k as u32;
            }
        }
        let sink = self
            .input_states
            .iter()
            .copied()
            .filter(|&s| !seen[s])
            .collect();
        RewardLayers {
            empty_objective: objective.is_empty(),
            layers,
            sink,
            index,
        }
    }
}

/// States that can still reach the objective, and the inputs that keep a
/// run inside that set.
#[derive(Debug, Clone)]
pub struct CoreachInput {
    pub coreach: BTreeSet<StateId>,
    in_coreach: Vec<bool>,
    allowed: Vec<Vec<InputVal>>,
}

impl CoreachInput {
    #[inline]
    pub fn contains(&self, s: StateId) -> bool {
        self.in_coreach[s]
    }

    /// Inputs `ν^inp` at `s` for which some output leads into the coreachable set.
    #[inline]
    pub fn allowed(&self, s: StateId) -> &[InputVal] {
        &self.allowed[s]
    }

    pub fn is_allowed(&self, s: StateId, i: InputVal) -> bool {
        self.allowed[s].binary_search(&i).is_ok()
    }
}

/// Partition of input states into distance layers `C_0..C_m` and the sink `C_{m+1}`.
#[derive(Debug, Clone, Serialize)]
pub struct RewardLayers {
    pub layers: Vec<BTreeSet<StateId>>,
    pub sink: BTreeSet<StateId>,
    #[serde(skip)]
    index: Vec<u32>,
    /// Set when the objective is empty and every state lands in the sink.
    pub empty_objective: bool,
}

impl RewardLayers {
    /// `m`, the index of the last non-sink layer.
    pub fn m(&self) -> u32 {
        self.layers.len() as u32 - 1
    }

    /// Index of the sink layer, `m + 1`.
    pub fn sink_index(&self) -> u32 {
        self.layers.len() as u32
    }

    /// `lastreward` of a run ending in `s`: the index of the layer holding `s`.
    #[inline]
    pub fn last_reward(&self, s: StateId) -> u32 {
        self.index[s]
    }
}

/// `r_{K-1} · Σ γ^i r_i` over an already padded reward sequence.
///
/// # Panics
/// On an empty reward sequence.
pub fn discounted_reward(rewards: &[u32], gamma: f64) -> f64 {
    let last = *rewards
        .last()
        .expect("discounted reward of an empty sequence") as f64;
    if last == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut g = 1.0;
    for &r in rewards {
        sum += g * r as f64;
        g *= gamma;
    }
    last * sum
}

/// `k² (1 - γ^K) / (1 - γ)`, the discounted reward of `K` constant rewards `k`.
pub fn discounted_constant(k: u32, len: usize, gamma: f64) -> f64 {
    let k = k as f64;
    k * k * (1.0 - gamma.powi(len as i32)) / (1.0 - gamma)
}

/// Coreachability and reward layers of `objective` as JSON, with state
/// names and input bit strings.
pub fn summary_json(m: &Machine, objective: &BTreeSet<StateId>) -> serde_json::Value {
    let graph = InputGraph::new(m);
    let names = |set: &BTreeSet<StateId>| -> Vec<&str> { set.iter().map(|&s| m.name(s)).collect() };
    let coreach = graph.coreach_inp(objective);
    let layers = graph.reward_layers(objective);
    let allowed: serde_json::Map<String, serde_json::Value> = graph
        .input_states()
        .iter()
        .map(|&s| {
            let bits: Vec<String> = coreach
                .allowed(s)
                .iter()
                .map(|&i| m.alphabet().input_bits(i))
                .collect();
            (m.name(s).to_string(), serde_json::json!(bits))
        })
        .collect();
    serde_json::json!({
        "inputs": m.alphabet().inputs(),
        "coreach": names(&coreach.coreach),
        "coreach_inp": allowed,
        "layers": layers.layers.iter().map(names).collect::<Vec<_>>(),
        "sink": names(&layers.sink),
        "empty_objective": layers.empty_objective,
    })
}
