//! Guarded two-phase automata.
//!
//! Input states carry guards over input propositions and lead to output
//! states; output states carry guards over output propositions and lead back
//! to input states. One step of a run reads a full valuation: the input part
//! selects the output state, the output part selects the next input state.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, InputVal, OutputVal, Phase, Valuation};
use crate::error::SpecError;
use crate::guard::{CompiledGuard, Guard};

pub type StateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    Input,
    Output,
}

impl StateKind {
    pub fn phase(self) -> Phase {
        match self {
            StateKind::Input => Phase::Input,
            StateKind::Output => Phase::Output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub name: String,
    pub kind: StateKind,
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: StateId,
    pub guard: Guard,
    pub target: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecAutomaton {
    alphabet: Alphabet,
    states: Vec<State>,
    initial: StateId,
    transitions: Vec<Transition>,
}

/// A named set of input states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub name: String,
    pub states: BTreeSet<StateId>,
}

/// A parsed spec file: one automaton and its named objectives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecFile {
    pub automaton: SpecAutomaton,
    pub objectives: Vec<Objective>,
}

impl SpecFile {
    pub fn objective(&self, name: &str) -> Result<&Objective, SpecError> {
        self.objectives
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| SpecError::UnknownObjective(name.to_string()))
    }
}

/// A state/valuation pair witnessing a validation failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub state: String,
    pub valuation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub complete: bool,
    pub deterministic: bool,
    pub errors_absorbing: bool,
    pub incomplete: Vec<Witness>,
    pub nondeterministic: Vec<Witness>,
    /// Error states from which a non-error input state is reachable.
    pub leaking_errors: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.complete && self.deterministic && self.errors_absorbing
    }
}

/// How missing input valuations at input states are routed by [`SpecAutomaton::complete`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CompletionPolicy {
    #[default]
    ToError,
    SelfLoop,
}

impl std::str::FromStr for CompletionPolicy {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "to-error" => Ok(CompletionPolicy::ToError),
            "self-loop" => Ok(CompletionPolicy::SelfLoop),
            _ => Err(SpecError::invalid(format!(
                "unknown completion policy `{s}` (expected to-error or self-loop)"
            ))),
        }
    }
}

impl SpecAutomaton {
    /// Builds an automaton, checking alternation, guard phases and that
    /// error states and the initial state are input states.
    pub fn new(
        alphabet: Alphabet,
        states: Vec<State>,
        initial: StateId,
        transitions: Vec<Transition>,
    ) -> Result<Self, SpecError> {
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s.name.as_str()) {
                return Err(SpecError::DuplicateState(s.name.clone()));
            }
            if s.error && s.kind != StateKind::Input {
                return Err(SpecError::invalid(format!(
                    "error state `{}` must be an input state",
                    s.name
                )));
            }
        }
        match states.get(initial) {
            Some(s) if s.kind == StateKind::Input => {}
            Some(s) => {
                return Err(SpecError::invalid(format!(
                    "initial state `{}` must be an input state",
                    s.name
                )))
            }
            None => return Err(SpecError::invalid("automaton has no initial state")),
        }
        for t in &transitions {
            let (Some(src), Some(dst)) = (states.get(t.source), states.get(t.target)) else {
                return Err(SpecError::invalid("transition references a missing state"));
            };
            if src.kind == dst.kind {
                return Err(SpecError::BadTransition {
                    source_state: src.name.clone(),
                    target: dst.name.clone(),
                    message: "transitions must alternate between input and output states".into(),
                });
            }
            let phase = src.kind.phase();
            for v in t.guard.vars() {
                match alphabet.phase_of(v) {
                    None => return Err(SpecError::UnknownProposition(v.to_string())),
                    Some((p, _)) if p != phase => {
                        return Err(SpecError::WrongPhase {
                            state: src.name.clone(),
                            phase: p.label(),
                            prop: v.to_string(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            alphabet,
            states,
            initial,
            transitions,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &State {
        &self.states[id]
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn state_id(&self, name: &str) -> Result<StateId, SpecError> {
        self.states
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| SpecError::UnknownState(name.to_string()))
    }

    pub fn name(&self, id: StateId) -> &str {
        &self.states[id].name
    }

    pub fn input_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).filter(|&s| self.states[s].kind == StateKind::Input)
    }

    pub fn error_states(&self) -> BTreeSet<StateId> {
        (0..self.states.len())
            .filter(|&s| self.states[s].error)
            .collect()
    }

    pub fn is_error(&self, s: StateId) -> bool {
        self.states[s].error
    }

    pub fn outgoing(&self, s: StateId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.source == s)
    }

    fn compile(&self, t: &Transition) -> CompiledGuard {
        let phase = self.states[t.source].kind.phase();
        t.guard
            .compile(&self.alphabet, phase)
            .expect("guards are checked at construction")
    }

    /// Valuations of the source phase enabling each outgoing transition of `s`.
    fn enabled_table(&self, s: StateId) -> Vec<(usize, Vec<bool>)> {
        let space = self.alphabet.space(self.states[s].kind.phase());
        self.transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.source == s)
            .map(|(i, t)| {
                let g = self.compile(t);
                (i, (0..space).map(|v| g.eval(v)).collect())
            })
            .collect()
    }

    /// States reachable from the initial state through satisfiable guards.
    pub fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(s) = queue.pop_front() {
            for (i, enabled) in self.enabled_table(s) {
                let t = &self.transitions[i];
                if enabled.iter().any(|&b| b) && seen.insert(t.target) {
                    queue.push_back(t.target);
                }
            }
        }
        seen
    }

    fn phase_bits(&self, kind: StateKind, v: u32) -> String {
        let n = self.alphabet.names(kind.phase()).len();
        crate::alphabet::bits_to_string(v, n)
    }

    /// Checks completeness and determinism over reachable states by
    /// enumerating every valuation of the relevant phase, and checks that no
    /// non-error input state is reachable from an error state.
    pub fn validate(&self) -> ValidationReport {
        let mut incomplete = Vec::new();
        let mut nondeterministic = Vec::new();
        for s in self.reachable() {
            let (inc, nondet) = self.check_state(s);
            incomplete.extend(inc);
            nondeterministic.extend(nondet);
        }
        let mut leaking_errors = Vec::new();
        for e in self.error_states() {
            let mut seen = BTreeSet::from([e]);
            let mut queue = VecDeque::from([e]);
            let mut leaks = false;
            while let Some(s) = queue.pop_front() {
                if self.states[s].kind == StateKind::Input && !self.states[s].error {
                    leaks = true;
                    break;
                }
                for t in self.outgoing(s) {
                    if seen.insert(t.target) {
                        queue.push_back(t.target);
                    }
                }
            }
            if leaks {
                leaking_errors.push(self.states[e].name.clone());
            }
        }
        ValidationReport {
            complete: incomplete.is_empty(),
            deterministic: nondeterministic.is_empty(),
            errors_absorbing: leaking_errors.is_empty(),
            incomplete,
            nondeterministic,
            leaking_errors,
        }
    }

    /// First uncovered valuation and first conflicting valuation of `s`, if any.
    fn check_state(&self, s: StateId) -> (Option<Witness>, Option<Witness>) {
        let kind = self.states[s].kind;
        let space = self.alphabet.space(kind.phase());
        let table = self.enabled_table(s);
        let mut incomplete = None;
        let mut nondet = None;
        for v in 0..space {
            let mut targets = table
                .iter()
                .filter(|(_, en)| en[v as usize])
                .map(|(i, _)| self.transitions[*i].target);
            match targets.next() {
                None if incomplete.is_none() => {
                    incomplete = Some(Witness {
                        state: self.states[s].name.clone(),
                        valuation: self.phase_bits(kind, v),
                    })
                }
                Some(first) if nondet.is_none() && targets.any(|t| t != first) => {
                    nondet = Some(Witness {
                        state: self.states[s].name.clone(),
                        valuation: self.phase_bits(kind, v),
                    })
                }
                _ => {}
            }
        }
        (incomplete, nondet)
    }

    fn fresh_name(&self, base: &str) -> String {
        if self.states.iter().all(|s| s.name != base) {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}{i}"))
            .find(|n| self.states.iter().all(|s| s.name != *n))
            .expect("unbounded")
    }

    fn add_state(&mut self, base: &str, kind: StateKind, error: bool) -> StateId {
        let name = self.fresh_name(base);
        self.states.push(State { name, kind, error });
        self.states.len() - 1
    }

    /// Completes the automaton. Missing input valuations of non-error input
    /// states go to an error state or loop back per `policy`; error states
    /// always loop so they stay absorbing; missing outputs go to an error
    /// state. An `err` state is created when one is needed and none exists.
    pub fn complete(&self, policy: CompletionPolicy) -> Result<SpecAutomaton, SpecError> {
        for s in 0..self.states.len() {
            if let (_, Some(w)) = self.check_state(s) {
                return Err(SpecError::Nondeterministic {
                    state: w.state,
                    valuation: w.valuation,
                });
            }
        }
        let mut out = self.clone();
        let mut sink = self.error_states().into_iter().next();
        for s in 0..self.states.len() {
            let (missing, _) = self.check_state(s);
            if missing.is_none() {
                continue;
            }
            let existing: Vec<Guard> = self.outgoing(s).map(|t| t.guard.clone()).collect();
            let rest = Guard::not(Guard::any(existing));
            let st = &self.states[s];
            match st.kind {
                StateKind::Input => {
                    let target = if st.error || policy == CompletionPolicy::SelfLoop {
                        s
                    } else {
                        *sink.get_or_insert_with(|| out.add_state("err", StateKind::Input, true))
                    };
                    let fill =
                        out.add_state(&format!("{}_fill", st.name), StateKind::Output, false);
                    out.transitions.push(Transition {
                        source: s,
                        guard: rest,
                        target: fill,
                    });
                    out.transitions.push(Transition {
                        source: fill,
                        guard: Guard::Const(true),
                        target,
                    });
                }
                StateKind::Output => {
                    let target =
                        *sink.get_or_insert_with(|| out.add_state("err", StateKind::Input, true));
                    out.transitions.push(Transition {
                        source: s,
                        guard: rest,
                        target,
                    });
                }
            }
        }
        // A freshly created error state needs its own loop.
        if let Some(e) = sink {
            if e >= self.states.len() {
                let fill = out.add_state(
                    &format!("{}_fill", out.states[e].name),
                    StateKind::Output,
                    false,
                );
                out.transitions.push(Transition {
                    source: e,
                    guard: Guard::Const(true),
                    target: fill,
                });
                out.transitions.push(Transition {
                    source: fill,
                    guard: Guard::Const(true),
                    target: e,
                });
            }
        }
        Ok(out)
    }

    /// All input states reached from input state `s` by reading `v`,
    /// evaluating guard trees directly.
    pub fn post(&self, s: StateId, v: Valuation) -> BTreeSet<StateId> {
        let mut out = BTreeSet::new();
        if self.states[s].kind != StateKind::Input {
            return out;
        }
        let holds = |g: &Guard| {
            g.eval_valuation(&self.alphabet, v)
                .expect("guards are checked at construction")
        };
        for t in self.outgoing(s).filter(|t| holds(&t.guard)) {
            for u in self.outgoing(t.target).filter(|u| holds(&u.guard)) {
                out.insert(u.target);
            }
        }
        out
    }

    /// All input states `p` with `s ∈ post(p, v)`.
    pub fn pre(&self, s: StateId, v: Valuation) -> BTreeSet<StateId> {
        self.input_states()
            .filter(|&p| self.post(p, v).contains(&s))
            .collect()
    }

    /// Runs a trace from the initial state; returns the end state and
    /// whether it is an error state.
    pub fn run_trace(&self, trace: &[Valuation]) -> Result<(StateId, bool), SpecError> {
        let mut s = self.initial;
        for (step, v) in trace.iter().enumerate() {
            let next = self.post(s, *v);
            let mut it = next.iter();
            match (it.next(), it.next()) {
                (Some(&n), None) => s = n,
                (None, _) => {
                    return Err(SpecError::Stuck {
                        step,
                        state: self.states[s].name.clone(),
                    })
                }
                (Some(_), Some(_)) => {
                    return Err(SpecError::Nondeterministic {
                        state: self.states[s].name.clone(),
                        valuation: self.alphabet.valuation_bits(*v),
                    })
                }
            }
        }
        Ok((s, self.states[s].error))
    }

    /// Synchronous product restricted to pairs reachable from the pair of
    /// initial states. Propositions of `self` keep their order; new
    /// propositions of `other` are appended.
    pub fn product(&self, other: &SpecAutomaton) -> Result<Product, SpecError> {
        let alphabet = union_alphabet(&self.alphabet, &other.alphabet)?;
        let compile = |a: &SpecAutomaton, t: &Transition| {
            t.guard
                .compile(&alphabet, a.states[t.source].kind.phase())
                .expect("union alphabet covers both components")
        };
        let out1: Vec<Vec<(usize, CompiledGuard)>> = (0..self.states.len())
            .map(|s| {
                self.transitions
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.source == s)
                    .map(|(i, t)| (i, compile(self, t)))
                    .collect()
            })
            .collect();
        let out2: Vec<Vec<(usize, CompiledGuard)>> = (0..other.states.len())
            .map(|s| {
                other
                    .transitions
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.source == s)
                    .map(|(i, t)| (i, compile(other, t)))
                    .collect()
            })
            .collect();

        let mut index: HashMap<(StateId, StateId), StateId> = HashMap::new();
        let mut pairs = Vec::new();
        let mut states = Vec::new();
        let mut names = BTreeSet::new();
        let mut transitions = Vec::new();
        let mut intern = |p: (StateId, StateId),
                          pairs: &mut Vec<(StateId, StateId)>,
                          states: &mut Vec<State>,
                          queue: &mut VecDeque<StateId>|
         -> StateId {
            if let Some(&id) = index.get(&p) {
                return id;
            }
            let (a, b) = (&self.states[p.0], &other.states[p.1]);
            let base = format!("{}.{}", a.name, b.name);
            let mut name = base.clone();
            let mut k = 1;
            while !names.insert(name.clone()) {
                name = format!("{base}_{k}");
                k += 1;
            }
            states.push(State {
                name,
                kind: a.kind,
                error: a.error || b.error,
            });
            pairs.push(p);
            let id = states.len() - 1;
            index.insert(p, id);
            queue.push_back(id);
            id
        };

        let mut queue = VecDeque::new();
        let init = intern(
            (self.initial, other.initial),
            &mut pairs,
            &mut states,
            &mut queue,
        );
        while let Some(id) = queue.pop_front() {
            let (s1, s2) = pairs[id];
            let space = alphabet.space(self.states[s1].kind.phase());
            for (i1, g1) in &out1[s1] {
                for (i2, g2) in &out2[s2] {
                    if !(0..space).any(|v| g1.eval(v) && g2.eval(v)) {
                        continue;
                    }
                    let (t1, t2) = (&self.transitions[*i1], &other.transitions[*i2]);
                    let target =
                        intern((t1.target, t2.target), &mut pairs, &mut states, &mut queue);
                    transitions.push(Transition {
                        source: id,
                        guard: Guard::and(t1.guard.clone(), t2.guard.clone()),
                        target,
                    });
                }
            }
        }
        let automaton = SpecAutomaton::new(alphabet, states, init, transitions)?;
        Ok(Product { automaton, pairs })
    }
}

/// A product automaton together with the component pair of each state.
#[derive(Debug, Clone)]
pub struct Product {
    pub automaton: SpecAutomaton,
    pub pairs: Vec<(StateId, StateId)>,
}

impl Product {
    /// Product input states whose left component is in `states`.
    pub fn lift_left(&self, states: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        (0..self.pairs.len())
            .filter(|&i| {
                self.automaton.states[i].kind == StateKind::Input
                    && states.contains(&self.pairs[i].0)
            })
            .collect()
    }

    /// Product input states whose right component is in `states`.
    pub fn lift_right(&self, states: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        (0..self.pairs.len())
            .filter(|&i| {
                self.automaton.states[i].kind == StateKind::Input
                    && states.contains(&self.pairs[i].1)
            })
            .collect()
    }

    pub fn lift_objective_left(&self, o: &Objective) -> Objective {
        Objective {
            name: o.name.clone(),
            states: self.lift_left(&o.states),
        }
    }
}

fn union_alphabet(a: &Alphabet, b: &Alphabet) -> Result<Alphabet, SpecError> {
    let mut merged = Vec::new();
    for phase in [Phase::Input, Phase::Output] {
        let mut names: Vec<String> = a.names(phase).to_vec();
        let mut last = None;
        for n in b.names(phase) {
            if let Some((p, _)) = a.phase_of(n) {
                if p != phase {
                    return Err(SpecError::invalid(format!(
                        "proposition `{n}` is an {} in one automaton and an {} in the other",
                        p.label(),
                        phase.label()
                    )));
                }
            }
            match a.names(phase).iter().position(|x| x == n) {
                Some(i) => {
                    if last.is_some_and(|l| i < l) {
                        return Err(SpecError::invalid(format!(
                            "proposition `{n}` is declared in a conflicting order"
                        )));
                    }
                    last = Some(i);
                }
                None => names.push(n.clone()),
            }
        }
        merged.push(names);
    }
    let outputs = merged.pop().expect("two phases");
    let inputs = merged.pop().expect("two phases");
    Alphabet::new(inputs, outputs)
}

/// Sentinel for a missing transition in [`Machine`] tables.
pub const NONE: u32 = u32::MAX;

/// Dense transition tables of an automaton: one entry per state and phase
/// valuation. Missing transitions are allowed; conflicting ones are not.
#[derive(Debug, Clone)]
pub struct Machine {
    alphabet: Alphabet,
    names: Vec<String>,
    kinds: Vec<StateKind>,
    error: Vec<bool>,
    initial: StateId,
    input_states: Vec<StateId>,
    in_space: usize,
    out_space: usize,
    inp: Vec<u32>,
    out: Vec<u32>,
}

impl Machine {
    pub fn new(a: &SpecAutomaton) -> Result<Self, SpecError> {
        let n = a.states.len();
        let in_space = a.alphabet.input_space() as usize;
        let out_space = a.alphabet.output_space() as usize;
        let mut inp = vec![NONE; n * in_space];
        let mut out = vec![NONE; n * out_space];
        for t in &a.transitions {
            let g = a.compile(t);
            let (table, space) = match a.states[t.source].kind {
                StateKind::Input => (&mut inp, in_space),
                StateKind::Output => (&mut out, out_space),
            };
            for v in 0..space {
                if !g.eval(v as u32) {
                    continue;
                }
                let slot = &mut table[t.source * space + v];
                if *slot != NONE && *slot as usize != t.target {
                    return Err(SpecError::Nondeterministic {
                        state: a.states[t.source].name.clone(),
                        valuation: a.phase_bits(a.states[t.source].kind, v as u32),
                    });
                }
                *slot = t.target as u32;
            }
        }
        Ok(Self {
            alphabet: a.alphabet.clone(),
            names: a.states.iter().map(|s| s.name.clone()).collect(),
            kinds: a.states.iter().map(|s| s.kind).collect(),
            error: a.states.iter().map(|s| s.error).collect(),
            initial: a.initial,
            input_states: a.input_states().collect(),
            in_space,
            out_space,
            inp,
            out,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn input_states(&self) -> &[StateId] {
        &self.input_states
    }

    pub fn is_input(&self, s: StateId) -> bool {
        self.kinds[s] == StateKind::Input
    }

    pub fn is_error(&self, s: StateId) -> bool {
        self.error[s]
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_id(&self, name: &str) -> Result<StateId, SpecError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| SpecError::UnknownState(name.to_string()))
    }

    /// Output state reached from input state `s` on input `i`.
    #[inline]
    pub fn input_step(&self, s: StateId, i: InputVal) -> Option<StateId> {
        let t = self.inp[s * self.in_space + i.0 as usize];
        (t != NONE).then_some(t as StateId)
    }

    /// Input state reached from output state `o` on output `v`.
    #[inline]
    pub fn output_step(&self, o: StateId, v: OutputVal) -> Option<StateId> {
        let t = self.out[o * self.out_space + v.0 as usize];
        (t != NONE).then_some(t as StateId)
    }

    #[inline]
    pub fn step(&self, s: StateId, v: Valuation) -> Option<StateId> {
        self.output_step(self.input_step(s, v.input)?, v.output)
    }

    pub fn run(&self, trace: &[Valuation]) -> Result<StateId, SpecError> {
        let mut s = self.initial;
        for (step, v) in trace.iter().enumerate() {
            s = self.step(s, *v).ok_or_else(|| SpecError::Stuck {
                step,
                state: self.names[s].clone(),
            })?;
        }
        Ok(s)
    }

    /// Named view of a state set, sorted by state id.
    pub fn names_of<'a>(&'a self, set: impl IntoIterator<Item = &'a StateId>) -> Vec<&'a str> {
        set.into_iter().map(|&s| self.names[s].as_str()).collect()
    }
}

/// Per-state map from names; used by callers resolving objective lists.
pub fn resolve_states(a: &SpecAutomaton, names: &[&str]) -> Result<BTreeSet<StateId>, SpecError> {
    names.iter().map(|n| a.state_id(n)).collect()
}

/// Map from state name to id.
pub fn name_index(a: &SpecAutomaton) -> BTreeMap<&str, StateId> {
    a.states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), i))
        .collect()
}
