use std::time::Duration;

use crate::alphabet::Alphabet;
use crate::automaton::SpecAutomaton;
use crate::bundled;

use super::{check_alphabet, AutomatonSut, Carriage, ExternalSut, Passageway, Sut, SutError};

/// A description of a SUT from which independent sessions can be opened.
///
/// URIs: `builtin:passageway[:N]`, `builtin:passageway-bug[:N]`,
/// `builtin:carriage`, `builtin:carriage-bug`, `builtin:i1`, `builtin:fig6`,
/// `exec:<command>`.
#[derive(Debug, Clone)]
pub enum SutSource {
    Passageway {
        rooms: usize,
        bug: bool,
    },
    Carriage {
        buggy: bool,
    },
    Automaton {
        name: String,
        automaton: SpecAutomaton,
    },
    Exec {
        command: String,
        timeout: Duration,
    },
}

impl SutSource {
    pub fn parse(uri: &str) -> Result<Self, SutError> {
        if let Some(command) = uri.strip_prefix("exec:") {
            if command.trim().is_empty() {
                return Err(SutError::Unknown(uri.to_string()));
            }
            return Ok(SutSource::Exec {
                command: command.to_string(),
                timeout: super::DEFAULT_TIMEOUT,
            });
        }
        let name = uri
            .strip_prefix("builtin:")
            .ok_or_else(|| SutError::Unknown(uri.to_string()))?;
        let (base, arg) = match name.split_once(':') {
            Some((b, a)) => (b, Some(a)),
            None => (name, None),
        };
        let rooms = match arg {
            None => bundled::DEFAULT_ROOMS,
            Some(n) => match n.parse::<usize>() {
                Ok(n) if (2..=12).contains(&n) && base.starts_with("passageway") => n,
                _ => return Err(SutError::Unknown(uri.to_string())),
            },
        };
        let automaton = |name: &str, text: &str| {
            let spec = crate::specfile::parse_spec(text).expect("bundled spec parses");
            SutSource::Automaton {
                name: name.to_string(),
                automaton: spec.automaton,
            }
        };
        Ok(match base {
            "passageway" => SutSource::Passageway { rooms, bug: false },
            "passageway-bug" => SutSource::Passageway { rooms, bug: true },
            "carriage" if arg.is_none() => SutSource::Carriage { buggy: false },
            "carriage-bug" if arg.is_none() => SutSource::Carriage { buggy: true },
            "i1" if arg.is_none() => automaton("i1", bundled::I1),
            "fig6" if arg.is_none() => automaton("fig6", bundled::FIG6),
            _ => return Err(SutError::Unknown(uri.to_string())),
        })
    }

    pub fn uri(&self) -> String {
        match self {
            SutSource::Passageway { rooms, bug } => {
                format!(
                    "builtin:passageway{}:{rooms}",
                    if *bug { "-bug" } else { "" }
                )
            }
            SutSource::Carriage { buggy } => {
                format!("builtin:carriage{}", if *buggy { "-bug" } else { "" })
            }
            SutSource::Automaton { name, .. } => format!("builtin:{name}"),
            SutSource::Exec { command, .. } => format!("exec:{command}"),
        }
    }

    /// Opens a fresh session whose propositions must match `expected`.
    pub fn open(&self, expected: &Alphabet) -> Result<Box<dyn Sut>, SutError> {
        let sut: Box<dyn Sut> = match self {
            SutSource::Exec { command, timeout } => {
                Box::new(ExternalSut::spawn(command, expected, *timeout)?)
            }
            _ => self.open_builtin()?,
        };
        check_alphabet(expected, sut.alphabet())?;
        Ok(sut)
    }

    /// Opens an in-process SUT with its own alphabet; fails for `exec:` sources.
    pub fn open_builtin(&self) -> Result<Box<dyn Sut>, SutError> {
        Ok(match self {
            SutSource::Passageway { rooms, bug } => Box::new(Passageway::new(*rooms, *bug)),
            SutSource::Carriage { buggy } => Box::new(Carriage::new(*buggy)),
            SutSource::Automaton { automaton, .. } => Box::new(
                AutomatonSut::new(automaton).map_err(|e| SutError::Protocol(e.to_string()))?,
            ),
            SutSource::Exec { .. } => return Err(SutError::Unknown(self.uri())),
        })
    }
}
