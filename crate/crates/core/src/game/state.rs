use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::spec::{Cell, Player};

/// Game status from player 1's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    P1Win,
    P2Win,
    Draw,
    Ongoing,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Ongoing
    }

    /// Player-1 payoff: +1 win, 0 draw, -1 loss. `None` while ongoing.
    pub fn payoff(self) -> Option<i8> {
        match self {
            Outcome::P1Win => Some(1),
            Outcome::Draw => Some(0),
            Outcome::P2Win => Some(-1),
            Outcome::Ongoing => None,
        }
    }

    pub fn win_for(player: Player) -> Outcome {
        match player {
            Player::P1 => Outcome::P1Win,
            Player::P2 => Outcome::P2Win,
        }
    }

    pub fn winner(self) -> Option<Player> {
        match self {
            Outcome::P1Win => Some(Player::P1),
            Outcome::P2Win => Some(Player::P2),
            _ => None,
        }
    }
}

/// One turn's placements. Cells are kept sorted row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Move(SmallVec<[Cell; 2]>);

impl Move {
    pub fn single(cell: impl Into<Cell>) -> Move {
        let mut cells = SmallVec::new();
        cells.push(cell.into());
        Move(cells)
    }

    pub fn new<C: Into<Cell>>(cells: impl IntoIterator<Item = C>) -> Move {
        let mut cells: SmallVec<[Cell; 2]> = cells.into_iter().map(Into::into).collect();
        cells.sort_unstable();
        Move(cells)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Occupancy {
    /// Bitboards indexed `row * cols + col`, one per player.
    Dense { cols: u32, bits: [u128; 2] },
    Sparse(BTreeMap<Cell, Player>),
}

/// Board occupancy plus turn bookkeeping. States are values: transitions
/// return a new state and never mutate their input.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    pub(crate) occupancy: Occupancy,
    pub(crate) to_move: Player,
    pub(crate) ply: u32,
    pub(crate) placements_left: u32,
    pub(crate) pieces: [u32; 2],
    pub(crate) outcome: Outcome,
}

impl GameState {
    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn ply(&self) -> u32 {
        self.ply
    }

    /// Cells the player to move must place this turn.
    pub fn placements_left_this_turn(&self) -> u32 {
        self.placements_left
    }

    pub fn piece_count(&self, player: Player) -> u32 {
        self.pieces[player.index()]
    }

    pub fn get(&self, cell: Cell) -> Option<Player> {
        match &self.occupancy {
            Occupancy::Dense { cols, bits } => {
                if cell.row < 0 || cell.col < 0 || cell.col as u32 >= *cols {
                    return None;
                }
                let idx = cell.row as u64 * *cols as u64 + cell.col as u64;
                if idx >= 128 {
                    return None;
                }
                let m = 1u128 << idx;
                if bits[0] & m != 0 {
                    Some(Player::P1)
                } else if bits[1] & m != 0 {
                    Some(Player::P2)
                } else {
                    None
                }
            }
            Occupancy::Sparse(map) => map.get(&cell).copied(),
        }
    }

    /// Occupied cells in row-major order.
    pub fn occupied(&self) -> Vec<(Cell, Player)> {
        match &self.occupancy {
            Occupancy::Dense { cols, bits } => {
                let mut out = Vec::with_capacity((self.pieces[0] + self.pieces[1]) as usize);
                let mut all = bits[0] | bits[1];
                while all != 0 {
                    let idx = all.trailing_zeros();
                    all &= all - 1;
                    let player = if bits[0] >> idx & 1 == 1 { Player::P1 } else { Player::P2 };
                    out.push((Cell::new((idx / cols) as i32, (idx % cols) as i32), player));
                }
                out
            }
            Occupancy::Sparse(map) => map.iter().map(|(c, p)| (*c, *p)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces == [0, 0]
    }

    pub(crate) fn dense_bits(&self) -> Option<[u128; 2]> {
        match &self.occupancy {
            Occupancy::Dense { bits, .. } => Some(*bits),
            Occupancy::Sparse(_) => None,
        }
    }
}
