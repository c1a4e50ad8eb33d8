//! Built-in SUTs: passageway reachability, determinism and the line protocol.

use std::collections::{BTreeSet, HashSet, VecDeque};

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otsynth_core::sut::{serve, Passageway, Position, Sut, SutSource};
use otsynth_core::InputVal;

/// Positions reachable from the start without a single collision.
fn reachable(p: &Passageway) -> HashSet<Position> {
    let mut seen = HashSet::from([Passageway::START]);
    let mut queue = VecDeque::from([Passageway::START]);
    while let Some(pos) = queue.pop_front() {
        for i in 0..4 {
            let (next, collision) = p.next(pos, InputVal(i));
            if !collision && seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

#[test]
fn every_doorway_is_reachable_without_collisions() {
    for rooms in 2..=8 {
        let p = Passageway::new(rooms, false);
        let seen = reachable(&p);
        for room in 1..rooms {
            assert!(
                seen.iter()
                    .any(|&q| q.room == room && p.is_open(q) && p.is_doorstep(q)),
                "{rooms} rooms: no open doorstep reached in room {room}"
            );
        }
        let visited: BTreeSet<usize> = seen.iter().map(|q| q.room).collect();
        assert_eq!(visited, (1..=rooms).collect());
    }
}

#[test]
fn bug_blocks_the_last_room() {
    for rooms in 2..=8 {
        let p = Passageway::new(rooms, true);
        let seen = reachable(&p);
        assert!(seen.iter().all(|q| q.room < rooms), "{rooms} rooms");
        assert!(seen.iter().any(|q| q.room == rooms - 1));
    }
}

#[test]
fn moves_are_diagonal_and_collisions_stay_put() {
    let p = Passageway::new(4, false);
    for &pos in &reachable(&p) {
        for i in 0..4 {
            let (next, collision) = p.next(pos, InputVal(i));
            if collision {
                assert_eq!(next, pos);
            } else if next.room == pos.room {
                assert_eq!((next.x - pos.x).abs(), 1);
                assert_eq!((next.y - pos.y).abs(), 1);
            } else {
                assert_eq!((next.room, next.x, next.y), (pos.room + 1, 0, pos.y));
            }
        }
    }
}

#[test]
fn builtin_suts_are_deterministic_after_reset() -> Result<()> {
    let uris = [
        "builtin:passageway:5",
        "builtin:passageway-bug:5",
        "builtin:carriage",
        "builtin:carriage-bug",
        "builtin:i1",
        "builtin:fig6",
    ];
    for uri in uris {
        let source = SutSource::parse(uri)?;
        assert_eq!(source.uri(), uri);
        let mut a = source.open_builtin()?;
        let mut b = source.open_builtin()?;
        let space = a.alphabet().input_space();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs: Vec<InputVal> = (0..60).map(|_| InputVal(rng.gen_range(0..space))).collect();
        let mut first = Vec::new();
        a.reset()?;
        for &i in &inputs {
            first.push(a.step(i)?);
        }
        for sut in [&mut a, &mut b] {
            sut.reset()?;
            let again = inputs
                .iter()
                .map(|&i| sut.step(i))
                .collect::<Result<Vec<_>, _>>()?;
            assert_eq!(again, first, "{uri}");
        }
    }
    Ok(())
}

#[test]
fn serve_replies_match_direct_steps() -> Result<()> {
    let mut direct = Passageway::new(3, true);
    let mut served = Passageway::new(3, true);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut script = String::from("RESET\n");
    let mut expected = vec!["OK".to_string()];
    for step in 0..200 {
        if step % 37 == 36 {
            script.push_str("RESET\n");
            expected.push("OK".into());
            direct.reset()?;
            continue;
        }
        let i = InputVal(rng.gen_range(0..4));
        let bits = direct.alphabet().input_bits(i);
        script.push_str(&format!("STEP {bits}\n"));
        let out = direct.step(i)?;
        expected.push(format!("OUT {}", direct.alphabet().output_bits(out)));
    }
    script.push_str("QUIT\nSTEP 11\n");
    let mut reply = Vec::new();
    serve(&mut served, script.as_bytes(), &mut reply)?;
    let text = String::from_utf8(reply)?;
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[..3],
        [
            "INPUTS right up",
            "OUTPUTS room_1 room_2 room_3 open doorstep collision",
            "READY"
        ]
    );
    assert_eq!(
        lines[3..],
        expected.iter().map(String::as_str).collect::<Vec<_>>()[..]
    );
    Ok(())
}

#[test]
fn unknown_uris_are_rejected() {
    for uri in [
        "builtin:nothing",
        "builtin:passageway:1",
        "builtin:passageway:13",
        "ftp:x",
    ] {
        assert!(SutSource::parse(uri).is_err(), "{uri}");
    }
}
