//! Atomic propositions and valuations.
//!
//! Propositions are split into an input phase (set by the tester) and an
//! output phase (set by the system). A phase valuation is a bit mask where
//! bit `i` holds the value of the `i`-th declared proposition of that phase.
//! Declaration order is the canonical order for every serialized trace and
//! for the SUT wire protocol.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SpecError;

/// Upper bound on the number of propositions per phase; valuations of a
/// phase are enumerated explicitly.
pub const MAX_PHASE_PROPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Input,
    Output,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Input => "input",
            Phase::Output => "output",
        }
    }
}

/// Input valuation: bit `i` is the value of `Alphabet::inputs()[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputVal(pub u32);

/// Output valuation: bit `i` is the value of `Alphabet::outputs()[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutputVal(pub u32);

impl InputVal {
    pub fn bit(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }
}

impl OutputVal {
    pub fn bit(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }
}

/// A full valuation observed at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Valuation {
    pub input: InputVal,
    pub output: OutputVal,
}

impl Valuation {
    pub fn new(input: InputVal, output: OutputVal) -> Self {
        Self { input, output }
    }
}

/// A trace is the sequence of full valuations of a run.
pub type Trace = Vec<Valuation>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Alphabet {
    pub fn new(inputs: Vec<String>, outputs: Vec<String>) -> Result<Self, SpecError> {
        if inputs.len() > MAX_PHASE_PROPS {
            return Err(SpecError::TooManyPropositions("input", inputs.len()));
        }
        if outputs.len() > MAX_PHASE_PROPS {
            return Err(SpecError::TooManyPropositions("output", outputs.len()));
        }
        let mut seen = HashSet::new();
        for name in inputs.iter().chain(outputs.iter()) {
            if !seen.insert(name.as_str()) {
                return Err(SpecError::DuplicateProposition(name.clone()));
            }
        }
        Ok(Self { inputs, outputs })
    }

    pub fn from_names(inputs: &[&str], outputs: &[&str]) -> Result<Self, SpecError> {
        Self::new(
            inputs.iter().map(|s| s.to_string()).collect(),
            outputs.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn names(&self, phase: Phase) -> &[String] {
        match phase {
            Phase::Input => &self.inputs,
            Phase::Output => &self.outputs,
        }
    }

    /// Number of input valuations, `2^|AP^inp|`.
    pub fn input_space(&self) -> u32 {
        1 << self.inputs.len()
    }

    /// Number of output valuations, `2^|AP^out|`.
    pub fn output_space(&self) -> u32 {
        1 << self.outputs.len()
    }

    pub fn space(&self, phase: Phase) -> u32 {
        match phase {
            Phase::Input => self.input_space(),
            Phase::Output => self.output_space(),
        }
    }

    pub fn all_inputs(&self) -> impl Iterator<Item = InputVal> {
        (0..self.input_space()).map(InputVal)
    }

    pub fn all_outputs(&self) -> impl Iterator<Item = OutputVal> {
        (0..self.output_space()).map(OutputVal)
    }

    pub fn phase_of(&self, name: &str) -> Option<(Phase, usize)> {
        if let Some(i) = self.inputs.iter().position(|p| p == name) {
            return Some((Phase::Input, i));
        }
        self.outputs
            .iter()
            .position(|p| p == name)
            .map(|i| (Phase::Output, i))
    }

    /// Value of a named proposition in a full valuation.
    pub fn lookup(&self, v: Valuation, name: &str) -> Option<bool> {
        match self.phase_of(name)? {
            (Phase::Input, i) => Some(v.input.bit(i)),
            (Phase::Output, i) => Some(v.output.bit(i)),
        }
    }

    pub fn input_bits(&self, v: InputVal) -> String {
        bits_to_string(v.0, self.inputs.len())
    }

    pub fn output_bits(&self, v: OutputVal) -> String {
        bits_to_string(v.0, self.outputs.len())
    }

    /// Full valuation as one bit string: input bits, then output bits.
    pub fn valuation_bits(&self, v: Valuation) -> String {
        let mut s = self.input_bits(v.input);
        s.push_str(&self.output_bits(v.output));
        s
    }

    pub fn parse_input_bits(&self, s: &str) -> Result<InputVal, SpecError> {
        parse_bits(s, self.inputs.len()).map(InputVal)
    }

    pub fn parse_output_bits(&self, s: &str) -> Result<OutputVal, SpecError> {
        parse_bits(s, self.outputs.len()).map(OutputVal)
    }

    pub fn parse_valuation_bits(&self, s: &str) -> Result<Valuation, SpecError> {
        let n = self.inputs.len();
        if s.len() != n + self.outputs.len() {
            return Err(SpecError::invalid(format!(
                "valuation `{s}` must have {} bits",
                n + self.outputs.len()
            )));
        }
        if !s.is_ascii() {
            return Err(SpecError::invalid(format!(
                "valuation `{s}` is not a bit string"
            )));
        }
        Ok(Valuation::new(
            self.parse_input_bits(&s[..n])?,
            self.parse_output_bits(&s[n..])?,
        ))
    }

    /// Builds an input valuation from the set of propositions that are true.
    pub fn input_from_true(&self, props: &[&str]) -> Result<InputVal, SpecError> {
        let mut v = 0;
        for p in props {
            match self.phase_of(p) {
                Some((Phase::Input, i)) => v |= 1 << i,
                _ => return Err(SpecError::UnknownProposition(p.to_string())),
            }
        }
        Ok(InputVal(v))
    }

    /// Builds an output valuation from the set of propositions that are true.
    pub fn output_from_true(&self, props: &[&str]) -> Result<OutputVal, SpecError> {
        let mut v = 0;
        for p in props {
            match self.phase_of(p) {
                Some((Phase::Output, i)) => v |= 1 << i,
                _ => return Err(SpecError::UnknownProposition(p.to_string())),
            }
        }
        Ok(OutputVal(v))
    }

    pub fn format_trace(&self, trace: &[Valuation]) -> Vec<String> {
        trace.iter().map(|v| self.valuation_bits(*v)).collect()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "inputs [{}] outputs [{}]",
            self.inputs.join(" "),
            self.outputs.join(" ")
        )
    }
}

pub fn bits_to_string(v: u32, n: usize) -> String {
    (0..n)
        .map(|i| if v >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bits(s: &str, n: usize) -> Result<u32, SpecError> {
    if s.len() != n {
        return Err(SpecError::invalid(format!("expected {n} bits, got `{s}`")));
    }
    let mut v = 0;
    for (i, c) in s.chars().enumerate() {
        match c {
            '0' => {}
            '1' => v |= 1 << i,
            _ => return Err(SpecError::invalid(format!("`{s}` is not a bit string"))),
        }
    }
    Ok(v)
}
