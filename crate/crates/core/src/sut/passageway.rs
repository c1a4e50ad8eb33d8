use crate::alphabet::{Alphabet, InputVal, OutputVal};

use super::{Sut, SutError};

pub const GRID: i32 = 4;

/// Robot position: room in `1..=N`, column `x` and row `y` in `0..4`, `y = 0` at the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Position {
    pub room: usize,
    pub x: i32,
    pub y: i32,
}

/// A row of `N` rooms, each a 4x4 grid. Every step moves the robot to a
/// diagonal neighbour; moving into a wall or a closed door is a collision
/// and leaves the robot in place. The open area is the bottom row of odd
/// rooms and the top row of even rooms; the doorstep is the rightmost column
/// of every room but the last. Moving right from an open doorstep enters the
/// next room at column 0 in the same row. With the bug, that transit is
/// suppressed in room `N - 1`.
#[derive(Debug, Clone)]
pub struct Passageway {
    alphabet: Alphabet,
    rooms: usize,
    bug: bool,
    pos: Position,
    collision: bool,
}

const RIGHT: u32 = 1;
const UP: u32 = 2;

impl Passageway {
    pub const START: Position = Position {
        room: 1,
        x: 0,
        y: 3,
    };

    pub fn new(rooms: usize, bug: bool) -> Self {
        assert!(rooms >= 2, "a passageway has at least two rooms");
        let mut outputs: Vec<String> = (1..=rooms).map(|j| format!("room_{j}")).collect();
        outputs.extend(["open", "doorstep", "collision"].map(String::from));
        let alphabet =
            Alphabet::new(vec!["right".into(), "up".into()], outputs).expect("static alphabet");
        Self {
            alphabet,
            rooms,
            bug,
            pos: Self::START,
            collision: false,
        }
    }

    pub fn rooms(&self) -> usize {
        self.rooms
    }

    pub fn position(&self) -> Position {
        self.pos
    }

    pub fn is_open(&self, p: Position) -> bool {
        p.y == if p.room % 2 == 1 { 0 } else { GRID - 1 }
    }

    pub fn is_doorstep(&self, p: Position) -> bool {
        p.x == GRID - 1 && p.room < self.rooms
    }

    /// Position after one move and whether it collided; the SUT state is not changed.
    pub fn next(&self, p: Position, input: InputVal) -> (Position, bool) {
        let right = input.0 & RIGHT != 0;
        let up = input.0 & UP != 0;
        let nx = p.x + if right { 1 } else { -1 };
        let ny = p.y + if up { 1 } else { -1 };
        if (0..GRID).contains(&nx) && (0..GRID).contains(&ny) {
            return (Position { x: nx, y: ny, ..p }, false);
        }
        if right && nx == GRID && self.is_open(p) && self.is_doorstep(p) {
            if self.bug && p.room == self.rooms - 1 {
                return (p, false);
            }
            return (
                Position {
                    room: p.room + 1,
                    x: 0,
                    y: p.y,
                },
                false,
            );
        }
        (p, true)
    }

    /// Output valuation observed at `p`.
    pub fn observe(&self, p: Position, collision: bool) -> OutputVal {
        let mut v = 1 << (p.room - 1);
        if self.is_open(p) {
            v |= 1 << self.rooms;
        }
        if self.is_doorstep(p) {
            v |= 1 << (self.rooms + 1);
        }
        if collision {
            v |= 1 << (self.rooms + 2);
        }
        OutputVal(v)
    }
}

impl Sut for Passageway {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn reset(&mut self) -> Result<(), SutError> {
        self.pos = Self::START;
        self.collision = false;
        Ok(())
    }

    fn step(&mut self, input: InputVal) -> Result<OutputVal, SutError> {
        let (p, collision) = self.next(self.pos, input);
        self.pos = p;
        self.collision = collision;
        Ok(self.observe(p, collision))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(w: &Passageway, v: OutputVal) -> String {
        w.alphabet().output_bits(v)
    }

    #[test]
    fn first_moves() {
        let mut w = Passageway::new(10, false);
        w.reset().unwrap();
        let v = w.step(InputVal(RIGHT)).unwrap();
        assert_eq!(
            w.position(),
            Position {
                room: 1,
                x: 1,
                y: 2
            }
        );
        assert_eq!(bits(&w, v), "1000000000000");
        w.reset().unwrap();
        let v = w.step(InputVal(UP)).unwrap();
        assert_eq!(w.position(), Passageway::START);
        assert_eq!(bits(&w, v), "1000000000001");
    }

    #[test]
    fn transit_keeps_row() {
        let w = Passageway::new(10, false);
        let from = Position {
            room: 1,
            x: 3,
            y: 0,
        };
        let (p, c) = w.next(from, InputVal(RIGHT | UP));
        assert_eq!(
            p,
            Position {
                room: 2,
                x: 0,
                y: 0
            }
        );
        assert!(!c);
        assert_eq!(bits(&w, w.observe(p, c)), "0100000000000");
    }

    #[test]
    fn bug_suppresses_transit_in_penultimate_room() {
        let w = Passageway::new(10, true);
        let from = Position {
            room: 9,
            x: 3,
            y: 0,
        };
        let (p, c) = w.next(from, InputVal(RIGHT));
        assert_eq!((p, c), (from, false));
        assert_eq!(bits(&w, w.observe(p, c)), "0000000010110");
    }
}
