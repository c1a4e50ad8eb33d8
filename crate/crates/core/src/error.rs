use thiserror::Error;

/// Errors raised while reading, building or transforming requirement automata.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("duplicate proposition `{0}`")]
    DuplicateProposition(String),
    #[error("phase `{0}` declares {1} propositions, at most {max} are supported", max = crate::alphabet::MAX_PHASE_PROPS)]
    TooManyPropositions(&'static str, usize),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("transition {source_state} -> {target}: {message}")]
    BadTransition {
        source_state: String,
        target: String,
        message: String,
    },
    #[error("guard on {state} references {phase} proposition `{prop}`")]
    WrongPhase {
        state: String,
        phase: &'static str,
        prop: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("automaton is nondeterministic at state {state} on valuation {valuation}")]
    Nondeterministic { state: String, valuation: String },
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("run is stuck at step {step}: no transition from {state}")]
    Stuck { step: usize, state: String },
    #[error("{0}")]
    Io(String),
}

impl SpecError {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        SpecError::Invalid(message.into())
    }
}
