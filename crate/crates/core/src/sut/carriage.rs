use crate::alphabet::{Alphabet, InputVal, OutputVal};

use super::{Sut, SutError};

/// Carriage controller over inputs `cargo bwdlimit fwdlimit` and outputs
/// `movefwd movebwd`. It starts moving forward when cargo is present at the
/// backward limit and stops at the forward limit. The buggy variant keeps
/// moving forward during the step where the forward limit is reached.
#[derive(Debug, Clone)]
pub struct Carriage {
    alphabet: Alphabet,
    buggy: bool,
    moving: bool,
}

const CARGO: u32 = 1;
const BWDLIMIT: u32 = 2;
const FWDLIMIT: u32 = 4;
const MOVEFWD: u32 = 1;

impl Carriage {
    pub fn new(buggy: bool) -> Self {
        let alphabet =
            Alphabet::from_names(&["cargo", "bwdlimit", "fwdlimit"], &["movefwd", "movebwd"])
                .expect("static alphabet");
        Self {
            alphabet,
            buggy,
            moving: false,
        }
    }
}

impl Sut for Carriage {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn reset(&mut self) -> Result<(), SutError> {
        self.moving = false;
        Ok(())
    }

    fn step(&mut self, input: InputVal) -> Result<OutputVal, SutError> {
        let i = input.0;
        let mut fwd = false;
        if self.moving {
            if i & FWDLIMIT != 0 {
                self.moving = false;
                fwd = self.buggy;
            } else {
                fwd = true;
            }
        } else if i & CARGO != 0 && i & BWDLIMIT != 0 {
            self.moving = true;
            fwd = true;
        }
        Ok(OutputVal(if fwd { MOVEFWD } else { 0 }))
    }
}
