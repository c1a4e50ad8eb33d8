//! Text and JSON spec files.
//!
//! ```text
//! # comments start with '#'
//! inputs: a b
//! outputs: one
//! states:
//!   s0 in initial
//!   s0_a out
//!   t in error
//! transitions:
//!   s0 -> s0_a [a]
//!   s0_a -> t [one]
//! objectives:
//!   reach_t = t
//! ```
//!
//! A transition between two input states is shorthand for a transition into
//! a fresh output state followed by a `true` transition to the target.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Phase};
use crate::automaton::{Objective, SpecAutomaton, SpecFile, State, StateKind, Transition};
use crate::error::SpecError;
use crate::guard::Guard;

/// Format-neutral document, shared by the text and JSON readers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDoc {
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    pub states: Vec<StateDoc>,
    #[serde(default)]
    pub transitions: Vec<TransitionDoc>,
    #[serde(default)]
    pub objectives: Vec<ObjectiveDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDoc {
    pub name: String,
    pub kind: KindDoc,
    #[serde(default)]
    pub initial: bool,
    #[serde(default)]
    pub error: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KindDoc {
    #[serde(rename = "in")]
    In,
    #[serde(rename = "out")]
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub source: String,
    pub target: String,
    pub guard: String,
    /// Source position (line, column of the guard text) for diagnostics.
    #[serde(skip)]
    pub pos: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveDoc {
    pub name: String,
    pub states: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Inputs,
    Outputs,
    States,
    Transitions,
    Objectives,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> SpecError {
    SpecError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '\''))
}

fn is_prop(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "true"
        && s != "false"
}

/// Splits a line into whitespace-separated words with 1-based columns.
fn words(line: &str, offset: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((offset + s + 1, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((offset + s + 1, &line[s..]));
    }
    out
}

/// Reads the text format into a document without resolving names.
pub fn parse_doc(text: &str) -> Result<SpecDoc, SpecError> {
    let mut doc = SpecDoc::default();
    let mut section = Section::None;
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let mut body = line;
        let mut offset = 0;
        let head = line.trim_start();
        for (kw, sec) in [
            ("inputs:", Section::Inputs),
            ("outputs:", Section::Outputs),
            ("states:", Section::States),
            ("transitions:", Section::Transitions),
            ("objectives:", Section::Objectives),
        ] {
            if let Some(rest) = head.strip_prefix(kw) {
                section = sec;
                offset = line.len() - rest.len();
                body = rest;
                break;
            }
        }
        if body.trim().is_empty() {
            continue;
        }
        let ws = words(body, offset);
        match section {
            Section::None => return Err(syntax(ln, ws[0].0, "expected a section header")),
            Section::Inputs | Section::Outputs => {
                for (col, w) in ws {
                    if !is_prop(w) {
                        return Err(syntax(ln, col, format!("invalid proposition name `{w}`")));
                    }
                    let list = if section == Section::Inputs {
                        &mut doc.inputs
                    } else {
                        &mut doc.outputs
                    };
                    list.push(w.to_string());
                }
            }
            Section::States => {
                let (col, name) = ws[0];
                if !is_name(name) {
                    return Err(syntax(ln, col, format!("invalid state name `{name}`")));
                }
                let Some(&(kcol, kind)) = ws.get(1) else {
                    return Err(syntax(
                        ln,
                        col + name.len(),
                        "expected state kind `in` or `out`",
                    ));
                };
                let kind = match kind {
                    "in" => KindDoc::In,
                    "out" => KindDoc::Out,
                    k => return Err(syntax(ln, kcol, format!("unknown state kind `{k}`"))),
                };
                let mut st = StateDoc {
                    name: name.to_string(),
                    kind,
                    initial: false,
                    error: false,
                };
                for &(fcol, flag) in &ws[2..] {
                    match flag {
                        "initial" => st.initial = true,
                        "error" => st.error = true,
                        f => return Err(syntax(ln, fcol, format!("unknown state flag `{f}`"))),
                    }
                }
                doc.states.push(st);
            }
            Section::Transitions => doc.transitions.push(parse_transition(body, offset, ln)?),
            Section::Objectives => {
                let Some(eq) = body.find('=') else {
                    return Err(syntax(ln, ws[0].0, "expected `name = state ...`"));
                };
                let name = body[..eq].trim();
                if !is_name(name) {
                    return Err(syntax(
                        ln,
                        ws[0].0,
                        format!("invalid objective name `{name}`"),
                    ));
                }
                let mut states = Vec::new();
                for (col, w) in words(&body[eq + 1..], offset + eq + 1) {
                    if !is_name(w) {
                        return Err(syntax(ln, col, format!("invalid state name `{w}`")));
                    }
                    states.push(w.to_string());
                }
                doc.objectives.push(ObjectiveDoc {
                    name: name.to_string(),
                    states,
                });
            }
        }
    }
    Ok(doc)
}

fn parse_transition(body: &str, offset: usize, ln: usize) -> Result<TransitionDoc, SpecError> {
    let first = words(body, offset)[0].0;
    let Some(arrow) = body.find("->") else {
        return Err(syntax(ln, first, "expected `src -> dst [guard]`"));
    };
    let source = body[..arrow].trim();
    if !is_name(source) {
        return Err(syntax(ln, first, format!("invalid state name `{source}`")));
    }
    let rest = &body[arrow + 2..];
    let (Some(open), Some(close)) = (rest.find('['), rest.rfind(']')) else {
        return Err(syntax(
            ln,
            offset + arrow + 3,
            "expected a guard in brackets",
        ));
    };
    if close < open || !rest[close + 1..].trim().is_empty() {
        return Err(syntax(
            ln,
            offset + arrow + 3 + close,
            "malformed guard brackets",
        ));
    }
    let target = rest[..open].trim();
    if !is_name(target) {
        return Err(syntax(
            ln,
            offset + arrow + 3,
            format!("invalid state name `{target}`"),
        ));
    }
    let guard_col = offset + arrow + 2 + open + 2;
    Ok(TransitionDoc {
        source: source.to_string(),
        target: target.to_string(),
        guard: rest[open + 1..close].to_string(),
        pos: Some((ln, guard_col)),
    })
}

fn relocate(e: SpecError, pos: Option<(usize, usize)>) -> SpecError {
    match (e, pos) {
        (
            SpecError::Syntax {
                column, message, ..
            },
            Some((line, col)),
        ) => SpecError::Syntax {
            line,
            column: col + column - 1,
            message,
        },
        (e, _) => e,
    }
}

impl SpecDoc {
    /// Resolves names, parses guards and desugars input-to-input transitions.
    pub fn build(&self) -> Result<SpecFile, SpecError> {
        let alphabet = Alphabet::new(self.inputs.clone(), self.outputs.clone())?;
        let mut states: Vec<State> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut initial = None;
        for s in &self.states {
            if index.insert(s.name.clone(), states.len()).is_some() {
                return Err(SpecError::DuplicateState(s.name.clone()));
            }
            if s.initial {
                if initial.is_some() {
                    return Err(SpecError::invalid(format!(
                        "second initial state `{}`",
                        s.name
                    )));
                }
                initial = Some(states.len());
            }
            states.push(State {
                name: s.name.clone(),
                kind: match s.kind {
                    KindDoc::In => StateKind::Input,
                    KindDoc::Out => StateKind::Output,
                },
                error: s.error,
            });
        }
        let initial = initial.ok_or_else(|| SpecError::invalid("no initial state declared"))?;
        let names: BTreeSet<String> = index.keys().cloned().collect();
        let mut fresh_names = names.clone();
        let mut transitions = Vec::new();
        for t in &self.transitions {
            let lookup = |n: &str| {
                index
                    .get(n)
                    .copied()
                    .ok_or_else(|| SpecError::BadTransition {
                        source_state: t.source.clone(),
                        target: t.target.clone(),
                        message: format!("unknown state `{n}`"),
                    })
            };
            let (src, dst) = (lookup(&t.source)?, lookup(&t.target)?);
            let guard = Guard::parse(&t.guard).map_err(|e| relocate(e, t.pos))?;
            let phase = states[src].kind.phase();
            for v in guard.vars() {
                match alphabet.phase_of(v) {
                    None => return Err(SpecError::UnknownProposition(v.to_string())),
                    Some((p, _)) if p != phase => {
                        return Err(SpecError::WrongPhase {
                            state: states[src].name.clone(),
                            phase: p.label(),
                            prop: v.to_string(),
                        })
                    }
                    _ => {}
                }
            }
            match (states[src].kind, states[dst].kind) {
                (StateKind::Input, StateKind::Input) => {
                    let base = format!("{}_{}", states[src].name, states[dst].name);
                    let mut name = base.clone();
                    let mut k = 1;
                    while !fresh_names.insert(name.clone()) {
                        name = format!("{base}{k}");
                        k += 1;
                    }
                    states.push(State {
                        name,
                        kind: StateKind::Output,
                        error: false,
                    });
                    let mid = states.len() - 1;
                    transitions.push(Transition {
                        source: src,
                        guard,
                        target: mid,
                    });
                    transitions.push(Transition {
                        source: mid,
                        guard: Guard::Const(true),
                        target: dst,
                    });
                }
                (StateKind::Output, StateKind::Output) => {
                    return Err(SpecError::BadTransition {
                        source_state: t.source.clone(),
                        target: t.target.clone(),
                        message: "an output state must lead to an input state".into(),
                    })
                }
                _ => transitions.push(Transition {
                    source: src,
                    guard,
                    target: dst,
                }),
            }
        }
        let automaton = SpecAutomaton::new(alphabet, states, initial, transitions)?;
        let mut objectives: Vec<Objective> = Vec::new();
        for o in &self.objectives {
            if objectives.iter().any(|x| x.name == o.name) {
                return Err(SpecError::invalid(format!(
                    "duplicate objective `{}`",
                    o.name
                )));
            }
            let mut set = BTreeSet::new();
            for n in &o.states {
                let id = automaton.state_id(n)?;
                if automaton.state(id).kind != StateKind::Input {
                    return Err(SpecError::invalid(format!(
                        "objective `{}` lists output state `{n}`",
                        o.name
                    )));
                }
                set.insert(id);
            }
            objectives.push(Objective {
                name: o.name.clone(),
                states: set,
            });
        }
        Ok(SpecFile {
            automaton,
            objectives,
        })
    }

    /// Document view of a resolved spec.
    pub fn from_spec(spec: &SpecFile) -> SpecDoc {
        let a = &spec.automaton;
        SpecDoc {
            inputs: a.alphabet().names(Phase::Input).to_vec(),
            outputs: a.alphabet().names(Phase::Output).to_vec(),
            states: a
                .states()
                .iter()
                .enumerate()
                .map(|(i, s)| StateDoc {
                    name: s.name.clone(),
                    kind: match s.kind {
                        StateKind::Input => KindDoc::In,
                        StateKind::Output => KindDoc::Out,
                    },
                    initial: i == a.initial(),
                    error: s.error,
                })
                .collect(),
            transitions: a
                .transitions()
                .iter()
                .map(|t| TransitionDoc {
                    source: a.name(t.source).to_string(),
                    target: a.name(t.target).to_string(),
                    guard: t.guard.to_string(),
                    pos: None,
                })
                .collect(),
            objectives: spec
                .objectives
                .iter()
                .map(|o| ObjectiveDoc {
                    name: o.name.clone(),
                    states: o.states.iter().map(|&s| a.name(s).to_string()).collect(),
                })
                .collect(),
        }
    }
}

pub fn parse_spec(text: &str) -> Result<SpecFile, SpecError> {
    parse_doc(text)?.build()
}

pub fn parse_spec_json(text: &str) -> Result<SpecFile, SpecError> {
    let doc: SpecDoc = serde_json::from_str(text).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.build()
}

/// Reads a spec file; `.json` files use the JSON mirror.
pub fn read_spec_file(path: &Path) -> Result<SpecFile, SpecError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SpecError::Io(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        parse_spec_json(&text)
    } else {
        parse_spec(&text)
    }
}

/// Writes a spec in the text format.
pub fn serialize_spec(spec: &SpecFile) -> String {
    let doc = SpecDoc::from_spec(spec);
    let mut out = String::new();
    let _ = writeln!(out, "inputs: {}", doc.inputs.join(" "));
    let _ = writeln!(out, "outputs: {}", doc.outputs.join(" "));
    out.push_str("states:\n");
    for s in &doc.states {
        let kind = if s.kind == KindDoc::In { "in" } else { "out" };
        let _ = write!(out, "  {} {kind}", s.name);
        if s.initial {
            out.push_str(" initial");
        }
        if s.error {
            out.push_str(" error");
        }
        out.push('\n');
    }
    out.push_str("transitions:\n");
    for t in &doc.transitions {
        let _ = writeln!(out, "  {} -> {} [{}]", t.source, t.target, t.guard);
    }
    if !doc.objectives.is_empty() {
        out.push_str("objectives:\n");
        for o in &doc.objectives {
            let _ = writeln!(out, "  {} = {}", o.name, o.states.join(" "));
        }
    }
    out
}

pub fn serialize_spec_json(spec: &SpecFile) -> String {
    serde_json::to_string_pretty(&SpecDoc::from_spec(spec)).expect("document is serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
inputs: a
outputs: x
states:
  s in initial
  m out
  e in error
transitions:
  s -> m [a]
  m -> e [x]   # trailing comment
  m -> s [!x]
objectives:
  goal = e
";

    #[test]
    fn parses_and_roundtrips() {
        let spec = parse_spec(SMALL).unwrap();
        assert_eq!(spec.automaton.states().len(), 3);
        let again = parse_spec(&serialize_spec(&spec)).unwrap();
        assert_eq!(again, spec);
        let json = parse_spec_json(&serialize_spec_json(&spec)).unwrap();
        assert_eq!(json, spec);
    }

    #[test]
    fn empty_transitions_parse() {
        let spec =
            parse_spec("inputs: a\noutputs:\nstates:\n s in initial\ntransitions:\n").unwrap();
        assert!(spec.automaton.transitions().is_empty());
        assert!(!spec.automaton.validate().complete);
    }

    #[test]
    fn unknown_prop_is_named() {
        let text = SMALL.replace("[a]", "[a & zz]");
        assert_eq!(
            parse_spec(&text).unwrap_err(),
            SpecError::UnknownProposition("zz".into())
        );
    }

    #[test]
    fn wrong_phase_guard_rejected() {
        let text = SMALL.replace("[a]", "[x]");
        assert!(matches!(
            parse_spec(&text).unwrap_err(),
            SpecError::WrongPhase { .. }
        ));
    }

    #[test]
    fn dangling_state_rejected() {
        let text = SMALL.replace("m -> s [!x]", "m -> nowhere [!x]");
        assert!(matches!(
            parse_spec(&text).unwrap_err(),
            SpecError::BadTransition { .. }
        ));
    }

    #[test]
    fn guard_syntax_error_has_file_position() {
        let text = SMALL.replace("[a]", "[a &]");
        match parse_spec(&text).unwrap_err() {
            SpecError::Syntax { line, column, .. } => {
                assert_eq!(line, 8);
                assert!(column > 10, "column {column}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn input_to_input_is_desugared() {
        let text =
            "inputs: a\noutputs: x\nstates:\n p in initial\n q in\ntransitions:\n p -> q [a]\n";
        let spec = parse_spec(text).unwrap();
        let a = &spec.automaton;
        assert_eq!(a.states().len(), 3);
        let mid = a.state_id("p_q").unwrap();
        assert_eq!(a.state(mid).kind, StateKind::Output);
        assert_eq!(a.transitions()[1].guard, Guard::Const(true));
    }
}
