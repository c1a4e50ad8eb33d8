//! Line protocol between the tester and an external SUT process.
//!
//! ```text
//! SUT    -> tester: INPUTS <name>...   OUTPUTS <name>...   READY
//! tester -> SUT:    RESET           reply OK
//!                   STEP <bits>     reply OUT <bits>
//!                   QUIT            no reply, the SUT exits with status 0
//! ```
//!
//! Any other line is answered with `ERR <message>`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use crate::alphabet::{parse_bits, Alphabet, InputVal, OutputVal};

use super::{check_alphabet, Sut, SutError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

enum Line {
    Full(String),
    Truncated(String),
}

/// A SUT running as a child process.
pub struct ExternalSut {
    alphabet: Alphabet,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Result<Line, String>>,
    timeout: Duration,
}

impl ExternalSut {
    /// Spawns `command` (split on whitespace) and checks that the declared
    /// propositions match `expected`, names and order.
    pub fn spawn(command: &str, expected: &Alphabet, timeout: Duration) -> Result<Self, SutError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| SutError::Io("empty SUT command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| SutError::Io(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut buf = String::new();
                match reader.read_line(&mut buf) {
                    Ok(0) => break,
                    Ok(_) => {
                        let line = match buf.strip_suffix('\n') {
                            Some(l) => Line::Full(l.trim_end_matches('\r').to_string()),
                            None => Line::Truncated(buf),
                        };
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e.to_string()));
                        break;
                    }
                }
            }
        });
        let mut sut = Self {
            alphabet: expected.clone(),
            child,
            stdin,
            lines: rx,
            timeout,
        };
        sut.handshake(expected)?;
        Ok(sut)
    }

    fn handshake(&mut self, expected: &Alphabet) -> Result<(), SutError> {
        let bad = |msg: String| SutError::Handshake(msg);
        let inputs = self.read_line().map_err(|e| bad(e.to_string()))?;
        let inputs = inputs
            .strip_prefix("INPUTS")
            .ok_or_else(|| bad(format!("expected INPUTS, got `{inputs}`")))?
            .split_whitespace()
            .map(String::from)
            .collect();
        let outputs = self.read_line().map_err(|e| bad(e.to_string()))?;
        let outputs = outputs
            .strip_prefix("OUTPUTS")
            .ok_or_else(|| bad(format!("expected OUTPUTS, got `{outputs}`")))?
            .split_whitespace()
            .map(String::from)
            .collect();
        let ready = self.read_line().map_err(|e| bad(e.to_string()))?;
        if ready != "READY" {
            return Err(bad(format!("expected READY, got `{ready}`")));
        }
        let declared = Alphabet::new(inputs, outputs).map_err(|e| bad(e.to_string()))?;
        check_alphabet(expected, &declared)
    }

    fn read_line(&mut self) -> Result<String, SutError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(Line::Full(l))) => Ok(l),
            Ok(Ok(Line::Truncated(l))) => {
                Err(SutError::Malformed(format!("truncated reply `{l}`")))
            }
            Ok(Err(e)) => Err(SutError::Io(e)),
            Err(RecvTimeoutError::Timeout) => {
                Err(SutError::Timeout(self.timeout.as_millis() as u64))
            }
            Err(RecvTimeoutError::Disconnected) => Err(SutError::Closed),
        }
    }

    fn send(&mut self, line: &str) -> Result<(), SutError> {
        let stdin = self.stdin.as_mut().ok_or(SutError::Closed)?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| SutError::Io(e.to_string()))
    }

    fn expect_reply(&mut self) -> Result<String, SutError> {
        let line = self.read_line()?;
        if let Some(msg) = line.strip_prefix("ERR") {
            return Err(SutError::Protocol(msg.trim().to_string()));
        }
        Ok(line)
    }
}

impl Sut for ExternalSut {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn reset(&mut self) -> Result<(), SutError> {
        self.send("RESET")?;
        let reply = self.expect_reply()?;
        if reply != "OK" {
            return Err(SutError::Malformed(format!("expected OK, got `{reply}`")));
        }
        Ok(())
    }

    fn step(&mut self, input: InputVal) -> Result<OutputVal, SutError> {
        let bits = self.alphabet.input_bits(input);
        self.send(&format!("STEP {bits}"))?;
        let reply = self.expect_reply()?;
        let out = reply
            .strip_prefix("OUT ")
            .ok_or_else(|| SutError::Malformed(format!("expected OUT, got `{reply}`")))?;
        parse_bits(out, self.alphabet.outputs().len())
            .map(OutputVal)
            .map_err(|e| SutError::Malformed(e.to_string()))
    }
}

impl Drop for ExternalSut {
    fn drop(&mut self) {
        let _ = self.send("QUIT");
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_secs(1);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs the SUT side of the protocol until `QUIT` or end of input.
pub fn serve<S: Sut + ?Sized, R: BufRead, W: Write>(
    sut: &mut S,
    reader: R,
    mut writer: W,
) -> std::io::Result<()> {
    let a = sut.alphabet().clone();
    writeln!(writer, "INPUTS {}", a.inputs().join(" "))?;
    writeln!(writer, "OUTPUTS {}", a.outputs().join(" "))?;
    writeln!(writer, "READY")?;
    writer.flush()?;
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let reply = if line == "QUIT" {
            return Ok(());
        } else if line == "RESET" {
            match sut.reset() {
                Ok(()) => "OK".to_string(),
                Err(e) => format!("ERR {e}"),
            }
        } else if let Some(bits) = line.strip_prefix("STEP ") {
            match a.parse_input_bits(bits) {
                Ok(i) => match sut.step(i) {
                    Ok(o) => format!("OUT {}", a.output_bits(o)),
                    Err(e) => format!("ERR {e}"),
                },
                Err(e) => format!("ERR {e}"),
            }
        } else {
            format!("ERR unknown command `{line}`")
        };
        writeln!(writer, "{reply}")?;
        writer.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::Passageway;

    #[test]
    fn serve_answers_each_line() {
        let mut sut = Passageway::new(3, false);
        let input = b"RESET\nSTEP 10\nBOGUS\nSTEP 1\nQUIT\nRESET\n";
        let mut out = Vec::new();
        serve(&mut sut, &input[..], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "INPUTS right up");
        assert_eq!(
            lines[1],
            "OUTPUTS room_1 room_2 room_3 open doorstep collision"
        );
        assert_eq!(lines[2], "READY");
        assert_eq!(lines[3], "OK");
        assert_eq!(lines[4], "OUT 100000");
        assert!(lines[5].starts_with("ERR"));
        assert!(lines[6].starts_with("ERR"));
        assert_eq!(lines.len(), 7);
    }
}
