//! Bundled example specs and the passageway requirement generator.

use std::fmt::Write as _;
use std::path::Path;

use crate::automaton::{CompletionPolicy, SpecFile};
use crate::error::SpecError;
use crate::guard::Guard;
use crate::specfile::{parse_spec, read_spec_file};

pub const FIG1: &str = include_str!("../specs/fig1.spec");
pub const FIG5: &str = include_str!("../specs/fig5.spec");
pub const CARRIAGE: &str = include_str!("../specs/carriage.spec");
pub const I1: &str = include_str!("../specs/i1.spec");
pub const FIG6: &str = include_str!("../specs/fig6.spec");
pub const PASSAGEWAY: &str = include_str!("../specs/passageway.spec");

pub const DEFAULT_ROOMS: usize = 10;

/// Names accepted by [`load_spec`] besides file paths.
pub const BUNDLED_NAMES: &[&str] = &["fig1", "fig5", "carriage", "i1", "fig6", "passageway"];

/// Loads a bundled spec by name (`passageway:N` selects the room count) or
/// reads a spec file from disk.
pub fn load_spec(name_or_path: &str) -> Result<SpecFile, SpecError> {
    let text = match name_or_path {
        "fig1" => FIG1,
        "fig5" => FIG5,
        "carriage" => CARRIAGE,
        "i1" => I1,
        "fig6" => FIG6,
        "passageway" => PASSAGEWAY,
        other => {
            if let Some(n) = other.strip_prefix("passageway:") {
                let rooms = n
                    .parse()
                    .map_err(|_| SpecError::invalid(format!("bad room count in `{other}`")))?;
                return parse_spec(&passageway(rooms)?);
            }
            return read_spec_file(Path::new(other));
        }
    };
    parse_spec(text)
}

/// Loads a spec and completes it.
pub fn load_completed(name_or_path: &str, policy: CompletionPolicy) -> Result<SpecFile, SpecError> {
    let spec = load_spec(name_or_path)?;
    Ok(SpecFile {
        automaton: spec.automaton.complete(policy)?,
        objectives: spec.objectives,
    })
}

/// Requirement automaton for a passageway of `rooms` rooms.
///
/// Room `i` has input states `m0` (outside the open area), `m1` (open, not at
/// the doorstep) and `m2` (open and at the doorstep). In odd rooms the open
/// row can only be reached moving down, in even rooms only moving up. Moving
/// right from `m2` must enter the next room; moving left from the doorstep
/// must not. Any collision leads to the absorbing `collision` state, any
/// unexpected room to `err`. The objective `room{N}` is every state of the
/// last room.
pub fn passageway(rooms: usize) -> Result<String, SpecError> {
    if !(2..=12).contains(&rooms) {
        return Err(SpecError::invalid(format!(
            "passageway needs 2..=12 rooms, got {rooms}"
        )));
    }
    let room = |j: usize| format!("room_{j}");
    let only = |j: usize| {
        let mut parts = vec![Guard::var(room(j))];
        for k in (1..=rooms).filter(|&k| k != j) {
            parts.push(Guard::not(Guard::var(room(k))));
        }
        parts.push(Guard::not(Guard::var("collision")));
        Guard::all(parts)
    };
    let open = || Guard::var("open");
    let ds = || Guard::var("doorstep");
    let not = Guard::not;
    let and = Guard::and;
    // Observation-routed successors in room j.
    let observe = |j: usize| {
        vec![
            (and(only(j), not(open())), format!("r{j}_m0")),
            (and(only(j), and(open(), not(ds()))), format!("r{j}_m1")),
            (and(only(j), and(open(), ds())), format!("r{j}_m2")),
        ]
    };

    let mut out = String::new();
    let _ = writeln!(out, "# Passageway requirement, {rooms} rooms.");
    out.push_str("inputs: right up\noutputs:");
    for j in 1..=rooms {
        let _ = write!(out, " {}", room(j));
    }
    out.push_str(" open doorstep collision\n");

    out.push_str("states:\n");
    for i in 1..=rooms {
        for m in 0..3 {
            let flag = if i == 1 && m == 0 { " initial" } else { "" };
            let _ = writeln!(out, "  r{i}_m{m} in{flag}");
        }
    }
    out.push_str("  collision in\n  err in error\n");
    for i in 1..=rooms {
        for o in ["m0_toward", "m0_away", "m1_r", "m1_l", "m2_r", "m2_l"] {
            let _ = writeln!(out, "  r{i}_{o} out");
        }
    }
    out.push_str("  collision_any out\n  err_any out\n");

    out.push_str("transitions:\n");
    let edge = |out: &mut String, src: &str, dst: &str, g: &Guard| {
        let _ = writeln!(out, "  {src} -> {dst} [{g}]");
    };
    for i in 1..=rooms {
        // Odd rooms open at the bottom (reached moving down), even rooms at the top.
        let toward = if i % 2 == 1 {
            not(Guard::var("up"))
        } else {
            Guard::var("up")
        };
        let away = not(toward.clone());
        let right = Guard::var("right");
        edge(
            &mut out,
            &format!("r{i}_m0"),
            &format!("r{i}_m0_toward"),
            &toward,
        );
        edge(
            &mut out,
            &format!("r{i}_m0"),
            &format!("r{i}_m0_away"),
            &away,
        );
        edge(&mut out, &format!("r{i}_m1"), &format!("r{i}_m1_r"), &right);
        edge(
            &mut out,
            &format!("r{i}_m1"),
            &format!("r{i}_m1_l"),
            &not(right.clone()),
        );
        edge(&mut out, &format!("r{i}_m2"), &format!("r{i}_m2_r"), &right);
        edge(
            &mut out,
            &format!("r{i}_m2"),
            &format!("r{i}_m2_l"),
            &not(right),
        );

        let own = observe(i);
        let m0 = format!("r{i}_m0");
        let m1 = format!("r{i}_m1");
        let m2 = format!("r{i}_m2");
        let per_output: Vec<(&str, Vec<(Guard, String)>)> = vec![
            ("m0_toward", own.clone()),
            (
                "m0_away",
                vec![
                    (and(only(i), not(open())), m0.clone()),
                    (and(only(i), open()), "err".into()),
                ],
            ),
            ("m1_r", own.clone()),
            (
                "m1_l",
                vec![
                    (and(only(i), not(open())), m0.clone()),
                    (and(only(i), and(open(), not(ds()))), m1.clone()),
                    (and(only(i), and(open(), ds())), "err".into()),
                ],
            ),
            (
                "m2_r",
                if i < rooms {
                    observe(i + 1)
                } else {
                    Vec::new()
                },
            ),
            (
                "m2_l",
                vec![
                    (and(only(i), not(open())), m0),
                    (and(only(i), and(open(), not(ds()))), m1),
                    (and(only(i), and(open(), ds())), m2),
                ],
            ),
        ];
        for (name, mut routes) in per_output {
            if i > 1 && name != "m2_r" {
                routes.extend(observe(i - 1));
            }
            let src = format!("r{i}_{name}");
            edge(&mut out, &src, "collision", &Guard::var("collision"));
            for (g, dst) in &routes {
                edge(&mut out, &src, dst, g);
            }
            let rest = and(
                not(Guard::var("collision")),
                not(Guard::any(routes.iter().map(|(g, _)| g.clone()))),
            );
            edge(&mut out, &src, "err", &rest);
        }
    }
    out.push_str("  collision -> collision_any [true]\n  collision_any -> collision [true]\n");
    out.push_str("  err -> err_any [true]\n  err_any -> err [true]\n");

    out.push_str("objectives:\n");
    let _ = writeln!(out, "  room{rooms} = r{rooms}_m0 r{rooms}_m1 r{rooms}_m2");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_specs_parse() {
        for name in BUNDLED_NAMES {
            load_spec(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn checked_in_passageway_matches_generator() {
        assert_eq!(PASSAGEWAY, passageway(DEFAULT_ROOMS).unwrap());
    }

    /// Rewrites `specs/passageway.spec`; run with `--ignored` after changing the generator.
    #[test]
    #[ignore]
    fn regenerate_passageway_spec() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/specs/passageway.spec");
        std::fs::write(path, passageway(DEFAULT_ROOMS).unwrap()).unwrap();
    }

    #[test]
    fn generated_passageway_is_valid() {
        for n in [2, 3, 10] {
            let spec = load_spec(&format!("passageway:{n}")).unwrap();
            let report = spec.automaton.validate();
            assert!(report.ok(), "{n} rooms: {report:?}");
            assert_eq!(spec.objectives[0].name, format!("room{n}"));
        }
    }
}
