//! Safety-game analysis: controllable predecessors, winning and cooperative
//! strategies, and the greedy strategy hierarchy.
//!
//! The tester picks inputs, the system picks outputs. Objective and error
//! states are terminal positions: a play stops there, so they are never
//! sources of controllable or cooperative moves.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::alphabet::InputVal;
use crate::analysis::InputGraph;
use crate::automaton::{Machine, StateId};

/// Memoryless strategy: the inputs prescribed at each state of its domain.
pub type Strategy = BTreeMap<StateId, Vec<InputVal>>;

pub struct Game<'g> {
    graph: &'g InputGraph,
    objective: BTreeSet<StateId>,
    terminal: Vec<bool>,
}

impl<'g> Game<'g> {
    pub fn new(graph: &'g InputGraph, objective: &BTreeSet<StateId>) -> Self {
        let mut terminal = vec![false; graph.num_states()];
        for &s in graph.input_states() {
            terminal[s] = graph.is_error(s) || objective.contains(&s);
        }
        Self {
            graph,
            objective: objective.clone(),
            terminal,
        }
    }

    pub fn objective(&self) -> &BTreeSet<StateId> {
        &self.objective
    }

    fn sources(&self) -> impl Iterator<Item = StateId> + '_ {
        self.graph
            .input_states()
            .iter()
            .copied()
            .filter(|&s| !self.terminal[s])
    }

    /// Whether input `i` at `s` leads into `B ∪ err` for every output.
    fn forces(&self, s: StateId, i: InputVal, b: &BTreeSet<StateId>) -> bool {
        let succ = self.graph.succ(s, i);
        !succ.is_empty()
            && succ
                .iter()
                .all(|&t| b.contains(&t) || self.graph.is_error(t))
    }

    /// `{s | ∃ν^inp ∀ν^out. post(s, ν) ∈ B ∪ err}`.
    pub fn cpre(&self, b: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        self.sources()
            .filter(|&s| self.graph.inputs().any(|i| self.forces(s, i, b)))
            .collect()
    }

    /// `{s | ∃ν. post(s, ν) ∈ B}`.
    pub fn pre(&self, b: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        self.sources()
            .filter(|&s| {
                self.graph
                    .inputs()
                    .any(|i| self.graph.succ(s, i).iter().any(|t| b.contains(t)))
            })
            .collect()
    }

    /// Least fixpoint of `X ↦ B ∪ CPre(X)` with its iterates
    /// `C_0 = ∅, C_i = B ∪ C_{i-1} ∪ CPre(C_{i-1})`; the last iterate is the fixpoint.
    pub fn cpre_star(&self, b: &BTreeSet<StateId>) -> (BTreeSet<StateId>, Vec<BTreeSet<StateId>>) {
        let mut iterates = vec![BTreeSet::new()];
        loop {
            let prev = iterates.last().expect("non-empty");
            let mut next = b.clone();
            next.extend(prev.iter().copied());
            next.extend(self.cpre(prev));
            if &next == prev {
                return (next, iterates);
            }
            iterates.push(next);
        }
    }

    /// Winning strategy towards `B` on `CPre*(B) ∖ B`: at `s` first entering
    /// iterate `i_s`, every input forcing `C_{i_s - 1} ∪ err`.
    pub fn winning_strategy(&self, b: &BTreeSet<StateId>) -> Strategy {
        let (fix, iterates) = self.cpre_star(b);
        self.winning_from_iterates(b, &fix, &iterates)
    }

    fn winning_from_iterates(
        &self,
        b: &BTreeSet<StateId>,
        fix: &BTreeSet<StateId>,
        iterates: &[BTreeSet<StateId>],
    ) -> Strategy {
        let mut st = Strategy::new();
        for &s in fix.difference(b) {
            let i_s = iterates
                .iter()
                .position(|c| c.contains(&s))
                .expect("s is in the fixpoint");
            let inputs: Vec<InputVal> = self
                .graph
                .inputs()
                .filter(|&i| self.forces(s, i, &iterates[i_s - 1]))
                .collect();
            assert!(
                !inputs.is_empty(),
                "winning strategy undefined at a fixpoint state"
            );
            st.insert(s, inputs);
        }
        st
    }

    /// Cooperative strategy on `Pre(B) ∖ B`: inputs for which some output reaches `B`.
    pub fn cooperative_strategy(&self, b: &BTreeSet<StateId>) -> Strategy {
        self.pre(b)
            .difference(b)
            .map(|&s| {
                let inputs = self
                    .graph
                    .inputs()
                    .filter(|&i| self.graph.succ(s, i).iter().any(|t| b.contains(t)))
                    .collect();
                (s, inputs)
            })
            .collect()
    }

    /// Builds the `W_i` / `Coop_i` hierarchy and the greedy strategy.
    pub fn greedy(&self, initial: StateId) -> GreedyArtifacts {
        let all_inputs: Vec<InputVal> = self.graph.inputs().collect();
        let (w0, it0) = self.cpre_star(&self.objective);
        let mut strategy = self.winning_from_iterates(&self.objective, &w0, &it0);
        let mut rank: BTreeMap<StateId, usize> = w0.iter().map(|&s| (s, 0)).collect();
        let mut w = vec![w0];
        let mut coop = Vec::new();
        let short_circuit = w[0].contains(&initial);
        if !short_circuit {
            loop {
                let wi = w.last().expect("non-empty").clone();
                let c: BTreeSet<StateId> = self.pre(&wi).difference(&wi).copied().collect();
                if c.is_empty() {
                    break;
                }
                let level = w.len();
                let coop_st = self.cooperative_strategy(&wi);
                let mut base = wi.clone();
                base.extend(c.iter().copied());
                let (next, iterates) = self.cpre_star(&base);
                let win_st = self.winning_from_iterates(&base, &next, &iterates);
                for &s in next.difference(&wi) {
                    rank.insert(s, level);
                    let chosen = if c.contains(&s) {
                        &coop_st[&s]
                    } else {
                        &win_st[&s]
                    };
                    strategy.insert(s, chosen.clone());
                }
                coop.push(c);
                w.push(next);
            }
        }
        let mut arbitrary = BTreeSet::new();
        let pools = (0..self.graph.num_states())
            .map(|s| match strategy.get(&s) {
                Some(inputs) => inputs.clone(),
                None => {
                    if self.graph.is_input(s) {
                        arbitrary.insert(s);
                    }
                    all_inputs.clone()
                }
            })
            .collect();
        GreedyArtifacts {
            w,
            coop,
            rank,
            strategy,
            arbitrary,
            short_circuit,
            pools,
        }
    }
}

/// The greedy hierarchy: `W_0 ⊆ W_1 ⊆ …`, `Coop_1, Coop_2, …` (stored from
/// index 0), the rank of every ranked state and the greedy strategy.
#[derive(Debug, Clone)]
pub struct GreedyArtifacts {
    pub w: Vec<BTreeSet<StateId>>,
    pub coop: Vec<BTreeSet<StateId>>,
    pub rank: BTreeMap<StateId, usize>,
    /// `st_greedy` on the states where it is defined by the construction.
    pub strategy: Strategy,
    /// Input states with no prescribed move; their pool is every input.
    pub arbitrary: BTreeSet<StateId>,
    /// Set when the initial state is already in `W_0` and no level was built.
    pub short_circuit: bool,
    pools: Vec<Vec<InputVal>>,
}

impl GreedyArtifacts {
    /// Inputs the greedy tester samples from at `s`.
    #[inline]
    pub fn pool(&self, s: StateId) -> &[InputVal] {
        &self.pools[s]
    }

    /// Replaces pools from an externally stored strategy.
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        for (s, inputs) in &strategy {
            self.pools[*s] = inputs.clone();
            self.arbitrary.remove(s);
        }
        self.strategy = strategy;
        self
    }

    pub fn to_json(&self, m: &Machine) -> Value {
        let names =
            |set: &BTreeSet<StateId>| -> Vec<&str> { set.iter().map(|&s| m.name(s)).collect() };
        json!({
            "W": self.w.iter().map(names).collect::<Vec<_>>(),
            "Coop": self.coop.iter().map(names).collect::<Vec<_>>(),
            "rank": self.rank.iter().map(|(&s, &r)| (m.name(s).to_string(), r)).collect::<BTreeMap<_, _>>(),
            "st_greedy": strategy_json(m, &self.strategy),
            "arbitrary": names(&self.arbitrary),
            "short_circuit": self.short_circuit,
        })
    }
}

/// Strategy as `{state: [input bits, ...]}`.
pub fn strategy_json(m: &Machine, st: &Strategy) -> Value {
    let map: BTreeMap<String, Vec<String>> = st
        .iter()
        .map(|(&s, inputs)| {
            (
                m.name(s).to_string(),
                inputs.iter().map(|&i| m.alphabet().input_bits(i)).collect(),
            )
        })
        .collect();
    json!(map)
}

/// Reads a strategy written by [`strategy_json`].
pub fn strategy_from_json(m: &Machine, v: &Value) -> Result<Strategy, crate::error::SpecError> {
    let obj = v
        .as_object()
        .ok_or_else(|| crate::error::SpecError::invalid("strategy must be a JSON object"))?;
    let mut st = Strategy::new();
    for (name, inputs) in obj {
        let s = m.state_id(name)?;
        let list = inputs.as_array().ok_or_else(|| {
            crate::error::SpecError::invalid(format!("strategy entry `{name}` must be a list"))
        })?;
        let mut vals = Vec::new();
        for bits in list {
            let bits = bits.as_str().ok_or_else(|| {
                crate::error::SpecError::invalid("strategy inputs must be bit strings")
            })?;
            vals.push(m.alphabet().parse_input_bits(bits)?);
        }
        if vals.is_empty() {
            return Err(crate::error::SpecError::invalid(format!(
                "empty strategy at `{name}`"
            )));
        }
        vals.sort();
        vals.dedup();
        st.insert(s, vals);
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::CompletionPolicy;
    use crate::bundled::load_completed;

    fn setup(name: &str) -> (Machine, InputGraph) {
        let spec = load_completed(name, CompletionPolicy::ToError).unwrap();
        let m = Machine::new(&spec.automaton).unwrap();
        let g = InputGraph::new(&m);
        (m, g)
    }

    fn ids(m: &Machine, names: &[&str]) -> BTreeSet<StateId> {
        names.iter().map(|n| m.state_id(n).unwrap()).collect()
    }

    fn inputs(m: &Machine, letters: &[&str]) -> Vec<InputVal> {
        // a := a, b := !a & b, c := !a & !b; a ignores the b bit.
        let mut out = Vec::new();
        for l in letters {
            match *l {
                "a" => out.extend([InputVal(0b01), InputVal(0b11)]),
                "b" => out.push(InputVal(0b10)),
                "c" => out.push(InputVal(0b00)),
                _ => unreachable!(),
            }
        }
        out.sort();
        let _ = m;
        out
    }

    #[test]
    fn fig1_cpre_examples() {
        let (m, g) = setup("fig1");
        let game = Game::new(&g, &ids(&m, &["o"]));
        assert!(game.cpre(&ids(&m, &["o"])).is_empty());
        let c = game.cpre(&ids(&m, &["s1", "o"]));
        assert!(c.contains(&m.state_id("s0").unwrap()) && c.contains(&m.state_id("s1").unwrap()));
        assert_eq!(game.cpre_star(&ids(&m, &["o"])).0, ids(&m, &["o"]));
        assert_eq!(
            game.cpre_star(&ids(&m, &["s1", "o"])).0,
            ids(&m, &["s0", "s1", "o"])
        );
        assert!(game.cpre_star(&BTreeSet::new()).0.is_empty());
    }

    #[test]
    fn fig1_strategies() {
        let (m, g) = setup("fig1");
        let game = Game::new(&g, &ids(&m, &["o"]));
        let s0 = m.state_id("s0").unwrap();
        let s1 = m.state_id("s1").unwrap();
        let win = game.winning_strategy(&ids(&m, &["s1", "o"]));
        assert_eq!(win[&s0], inputs(&m, &["a"]));
        let coop = game.cooperative_strategy(&ids(&m, &["o"]));
        assert_eq!(coop[&s1], inputs(&m, &["b", "c"]));
        let gr = game.greedy(m.initial());
        assert_eq!(gr.w[0], ids(&m, &["o"]));
        assert_eq!(gr.pool(s0), inputs(&m, &["a"]).as_slice());
        assert_eq!(gr.pool(s1), inputs(&m, &["b", "c"]).as_slice());
        assert_eq!(gr.coop[0], ids(&m, &["s1"]));
        assert_eq!(gr.rank[&s0], 1);
    }

    #[test]
    fn fig5_hierarchy() {
        let (m, g) = setup("fig5");
        let o = ids(&m, &["o"]);
        let game = Game::new(&g, &o);
        assert_eq!(game.cpre(&o), ids(&m, &["s0", "s0p"]));
        let gr = game.greedy(m.initial());
        assert_eq!(gr.w[0], ids(&m, &["s0", "s0p", "o"]));
        assert_eq!(gr.coop, vec![ids(&m, &["init", "sc0"]), ids(&m, &["sc1"])]);
        let union = gr.w.last().unwrap();
        assert_eq!(union, &g.pre_star(&o));
    }

    #[test]
    fn passageway_greedy_moves_right_towards_open_row() {
        let (m, g) = setup("passageway:4");
        let spec = crate::bundled::load_spec("passageway:4").unwrap();
        let o: BTreeSet<StateId> = spec.objectives[0]
            .states
            .iter()
            .map(|&s| m.state_id(spec.automaton.name(s)).unwrap())
            .collect();
        let gr = Game::new(&g, &o).greedy(m.initial());
        // Inputs are (right, up): bit 0 is right, bit 1 is up.
        let down = [InputVal(0b00), InputVal(0b01)];
        let up = [InputVal(0b10), InputVal(0b11)];
        let right = [InputVal(0b01), InputVal(0b11)];
        for room in 1..4 {
            let pool = |k: usize| {
                gr.pool(m.state_id(&format!("r{room}_m{k}")).unwrap())
                    .to_vec()
            };
            let toward = if room % 2 == 1 { down } else { up };
            assert_eq!(pool(0), toward, "room {room} m0");
            assert_eq!(pool(1), right, "room {room} m1");
            assert_eq!(pool(2), right, "room {room} m2");
        }
        assert_eq!(gr.w.last().unwrap(), &g.pre_star(&o));
    }

    #[test]
    fn strategy_json_roundtrip() {
        let (m, g) = setup("fig1");
        let game = Game::new(&g, &ids(&m, &["o"]));
        let gr = game.greedy(m.initial());
        let v = strategy_json(&m, &gr.strategy);
        assert_eq!(strategy_from_json(&m, &v).unwrap(), gr.strategy);
    }
}
