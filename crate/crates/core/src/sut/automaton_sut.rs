use crate::alphabet::{Alphabet, InputVal, OutputVal};
use crate::automaton::{Machine, SpecAutomaton, StateId};
use crate::error::SpecError;

use super::{Sut, SutError};

/// Executes an output-deterministic automaton as a SUT. At each output state
/// the smallest enabled output valuation is produced.
#[derive(Debug, Clone)]
pub struct AutomatonSut {
    machine: Machine,
    /// Chosen output and successor per output state.
    choice: Vec<Option<(OutputVal, StateId)>>,
    state: StateId,
}

impl AutomatonSut {
    pub fn new(a: &SpecAutomaton) -> Result<Self, SpecError> {
        let machine = Machine::new(a)?;
        let choice = (0..machine.num_states())
            .map(|o| {
                if machine.is_input(o) {
                    return None;
                }
                machine
                    .alphabet()
                    .all_outputs()
                    .find_map(|v| machine.output_step(o, v).map(|t| (v, t)))
            })
            .collect();
        let state = machine.initial();
        Ok(Self {
            machine,
            choice,
            state,
        })
    }

    pub fn state(&self) -> StateId {
        self.state
    }
}

impl Sut for AutomatonSut {
    fn alphabet(&self) -> &Alphabet {
        self.machine.alphabet()
    }

    fn reset(&mut self) -> Result<(), SutError> {
        self.state = self.machine.initial();
        Ok(())
    }

    fn step(&mut self, input: InputVal) -> Result<OutputVal, SutError> {
        let stuck = || {
            SutError::Protocol(format!(
                "implementation automaton has no move on input {}",
                input.0
            ))
        };
        let o = self
            .machine
            .input_step(self.state, input)
            .ok_or_else(stuck)?;
        let (v, next) = self.choice[o].ok_or_else(stuck)?;
        self.state = next;
        Ok(v)
    }
}
