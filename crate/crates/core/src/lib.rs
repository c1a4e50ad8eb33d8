//! Online black-box test synthesis from safety-automaton requirements.

pub mod alphabet;
pub mod analysis;
pub mod automaton;
pub mod bundled;
pub mod error;
pub mod game;
pub mod guard;
pub mod specfile;
pub mod sut;
pub mod testers;

pub use alphabet::{Alphabet, InputVal, OutputVal, Phase, Trace, Valuation};
pub use automaton::{
    CompletionPolicy, Machine, Objective, Product, SpecAutomaton, SpecFile, State, StateId,
    StateKind, Transition, ValidationReport,
};
pub use error::SpecError;
pub use guard::Guard;
pub use specfile::{parse_spec, read_spec_file, serialize_spec};
