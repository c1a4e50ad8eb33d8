//! The black-box boundary: SUT sessions, bundled reference systems and the
//! line protocol for external processes.

mod automaton_sut;
mod builtin;
mod carriage;
mod passageway;
mod protocol;

pub use automaton_sut::AutomatonSut;
pub use builtin::SutSource;
pub use carriage::Carriage;
pub use passageway::{Passageway, Position};
pub use protocol::{serve, ExternalSut, DEFAULT_TIMEOUT};

use thiserror::Error;

use crate::alphabet::{Alphabet, InputVal, OutputVal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SutError {
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("no reply within {0} ms")]
    Timeout(u64),
    #[error("SUT closed the connection")]
    Closed,
    #[error("I/O error: {0}")]
    Io(String),
    #[error("SUT reported an error: {0}")]
    Protocol(String),
    #[error("unknown SUT `{0}`")]
    Unknown(String),
}

/// A resettable, synchronous system under test.
pub trait Sut: Send {
    fn alphabet(&self) -> &Alphabet;
    fn reset(&mut self) -> Result<(), SutError>;
    fn step(&mut self, input: InputVal) -> Result<OutputVal, SutError>;
}

impl Sut for Box<dyn Sut> {
    fn alphabet(&self) -> &Alphabet {
        (**self).alphabet()
    }

    fn reset(&mut self) -> Result<(), SutError> {
        (**self).reset()
    }

    fn step(&mut self, input: InputVal) -> Result<OutputVal, SutError> {
        (**self).step(input)
    }
}

/// Checks that a SUT declares exactly the expected propositions, in order.
pub fn check_alphabet(expected: &Alphabet, actual: &Alphabet) -> Result<(), SutError> {
    if expected.inputs() != actual.inputs() {
        return Err(SutError::Handshake(format!(
            "inputs [{}] do not match expected [{}]",
            actual.inputs().join(" "),
            expected.inputs().join(" ")
        )));
    }
    if expected.outputs() != actual.outputs() {
        return Err(SutError::Handshake(format!(
            "outputs [{}] do not match expected [{}]",
            actual.outputs().join(" "),
            expected.outputs().join(" ")
        )));
    }
    Ok(())
}
