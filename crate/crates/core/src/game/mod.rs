//! The rule family: k-in-a-row variants on finite or unbounded grids with
//! per-player line rules, misère completion and multi-piece openings.
//!
//! A [`GameSpec`] is plain data. [`Game`] compiles it once (line windows,
//! symmetry tables) and then answers every rules question about
//! [`GameState`] values: legal moves, transitions, terminal status and
//! canonical transposition keys.

mod geometry;
mod spec;
mod state;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use smallvec::SmallVec;
use thiserror::Error;

use geometry::{symmetry_maps, DenseGeometry};
pub use spec::{
    Board, CanonicalRules, Category, Cell, CompletionEffect, GameSpec, LineRule, Player, DEFAULT_INFINITE_MAX_PLIES,
};
pub use state::{GameState, Move, Outcome};
use state::Occupancy;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("invalid game spec: {0}")]
    InvalidSpec(String),
    #[error("no moves exist in a terminal state")]
    TerminalState,
    #[error("illegal placement at {cell}: {reason}")]
    IllegalMove { cell: Cell, reason: &'static str },
    #[error("move places {got} pieces but this turn requires {expected}")]
    WrongPlacementCount { expected: usize, got: usize },
}

/// Transposition key: equal for states related by a rule-preserving board
/// symmetry, distinct whenever turn bookkeeping differs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CanonicalKey {
    Dense { bits: [u128; 2], to_move: Player, ply: u32, placements_left: u32 },
    Sparse { cells: Vec<(i32, i32, Player)>, to_move: Player, ply: u32, placements_left: u32 },
}

#[derive(Clone, Debug)]
enum Geometry {
    Dense(DenseGeometry),
    Sparse,
}

/// A compiled [`GameSpec`].
#[derive(Clone, Debug)]
pub struct Game {
    spec: GameSpec,
    geometry: Geometry,
}

impl Game {
    pub fn new(spec: GameSpec) -> Result<Game, GameError> {
        spec.validate()?;
        let geometry = match DenseGeometry::new(&spec) {
            Some(g) => Geometry::Dense(g),
            None => Geometry::Sparse,
        };
        Ok(Game { spec, geometry })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.spec.board, Board::Finite { .. })
    }

    pub fn initial_state(&self) -> GameState {
        let occupancy = match &self.geometry {
            Geometry::Dense(g) => Occupancy::Dense { cols: g.cols, bits: [0, 0] },
            Geometry::Sparse => Occupancy::Sparse(BTreeMap::new()),
        };
        GameState {
            occupancy,
            to_move: Player::P1,
            ply: 0,
            placements_left: self.spec.opening_placements_p1,
            pieces: [0, 0],
            outcome: Outcome::Ongoing,
        }
    }

    /// Builds an arbitrary position. Ply and the current turn's placement
    /// count are inferred from the piece counts; terminal status comes from
    /// a full board scan.
    pub fn state_from_cells<C: Into<Cell>>(
        &self,
        cells: impl IntoIterator<Item = (C, Player)>,
        to_move: Player,
    ) -> Result<GameState, GameError> {
        let mut state = self.initial_state();
        state.to_move = to_move;
        for (cell, player) in cells {
            let cell = cell.into();
            if !self.spec.board.contains(cell) {
                return Err(GameError::IllegalMove { cell, reason: "outside the board" });
            }
            if state.get(cell).is_some() {
                return Err(GameError::IllegalMove { cell, reason: "cell listed twice" });
            }
            self.set(&mut state, cell, player);
        }
        let turns = |p: Player| {
            let n = state.pieces[p.index()];
            if n == 0 {
                0
            } else {
                1 + n.saturating_sub(self.spec.opening_placements(p))
            }
        };
        state.ply = turns(Player::P1) + turns(Player::P2);
        state.placements_left = self.placements_for(&state, to_move);
        state.outcome = self.scan_outcome(&state);
        Ok(state)
    }

    pub fn terminal_status(&self, state: &GameState) -> Outcome {
        state.outcome
    }

    /// Cells available to a single placement: every empty cell on a finite
    /// board; on an infinite board the empty cells within Chebyshev
    /// distance 2 of a piece (the origin when the board is empty).
    pub fn candidate_cells(&self, state: &GameState) -> Vec<Cell> {
        match (&self.geometry, &state.occupancy) {
            (Geometry::Dense(g), Occupancy::Dense { bits, .. }) => {
                let mut empty = g.full & !(bits[0] | bits[1]);
                let mut out = Vec::with_capacity(empty.count_ones() as usize);
                while empty != 0 {
                    let i = empty.trailing_zeros() as usize;
                    empty &= empty - 1;
                    out.push(g.cell(i));
                }
                out
            }
            (_, Occupancy::Sparse(map)) => match self.spec.board {
                Board::Finite { rows, cols } => (0..rows as i32)
                    .flat_map(|r| (0..cols as i32).map(move |c| Cell::new(r, c)))
                    .filter(|c| !map.contains_key(c))
                    .collect(),
                Board::Infinite => frontier(map.keys().copied(), |c| map.contains_key(&c)).into_iter().collect(),
            },
            _ => unreachable!("state does not belong to this game"),
        }
    }

    /// Placements the current turn requires, capped by the empty cells left.
    fn move_size(&self, state: &GameState, candidates: usize) -> usize {
        let n = state.placements_left as usize;
        if self.is_finite() {
            n.min(candidates)
        } else {
            n
        }
    }

    pub fn legal_moves(&self, state: &GameState) -> Result<Vec<Move>, GameError> {
        if state.outcome.is_terminal() {
            return Err(GameError::TerminalState);
        }
        let candidates = self.candidate_cells(state);
        let n = self.move_size(state, candidates.len());
        if n == 1 {
            return Ok(candidates.into_iter().map(Move::single).collect());
        }
        if self.is_finite() {
            let mut out = Vec::new();
            combinations(&candidates, n, &mut SmallVec::new(), 0, &mut out);
            return Ok(out);
        }
        let Occupancy::Sparse(map) = &state.occupancy else { unreachable!() };
        let mut found = BTreeSet::new();
        infinite_placements(map, &mut Vec::new(), n, &mut found);
        Ok(found.into_iter().collect())
    }

    pub fn apply_move(&self, state: &GameState, mv: &Move) -> Result<GameState, GameError> {
        self.check_move(state, mv)?;
        let mut next = state.clone();
        self.place(&mut next, mv.cells());
        Ok(next)
    }

    fn check_move(&self, state: &GameState, mv: &Move) -> Result<(), GameError> {
        if state.outcome.is_terminal() {
            return Err(GameError::TerminalState);
        }
        let cells = mv.cells();
        let empties = match self.spec.board {
            Board::Finite { .. } => {
                self.spec.board.cells().unwrap_or(0) as usize - (state.pieces[0] + state.pieces[1]) as usize
            }
            Board::Infinite => usize::MAX,
        };
        let expected = self.move_size(state, empties);
        if cells.len() != expected {
            return Err(GameError::WrongPlacementCount { expected, got: cells.len() });
        }
        for (i, &cell) in cells.iter().enumerate() {
            if !self.spec.board.contains(cell) {
                return Err(GameError::IllegalMove { cell, reason: "outside the board" });
            }
            if state.get(cell).is_some() {
                return Err(GameError::IllegalMove { cell, reason: "cell is occupied" });
            }
            if cells[..i].contains(&cell) {
                return Err(GameError::IllegalMove { cell, reason: "cell placed twice in one move" });
            }
        }
        if let (Board::Infinite, Occupancy::Sparse(map)) = (self.spec.board, &state.occupancy) {
            // Each placement must touch the frontier grown by the move's
            // earlier placements, in some order.
            let mut placed: Vec<Cell> = Vec::new();
            let mut pending: Vec<Cell> = cells.to_vec();
            while !pending.is_empty() {
                let reachable = |c: Cell| {
                    if map.is_empty() && placed.is_empty() {
                        c == Cell::new(0, 0)
                    } else {
                        map.keys().chain(placed.iter()).any(|o| o.chebyshev(c) <= 2)
                    }
                };
                match pending.iter().position(|&c| reachable(c)) {
                    Some(i) => placed.push(pending.swap_remove(i)),
                    None => {
                        return Err(GameError::IllegalMove { cell: pending[0], reason: "outside the play frontier" })
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies placements already known to be legal, in place.
    pub(crate) fn place(&self, state: &mut GameState, cells: &[Cell]) {
        let mover = state.to_move;
        for &c in cells {
            self.set(state, c, mover);
        }
        let completed = match (&self.geometry, &state.occupancy) {
            (Geometry::Dense(g), Occupancy::Dense { bits, .. }) => {
                g.completes_line(mover, bits[mover.index()], cells.iter().map(|&c| g.index(c).unwrap()))
            }
            (_, Occupancy::Sparse(map)) => cells.iter().any(|&c| self.sparse_line_through(map, c, mover)),
            _ => unreachable!("state does not belong to this game"),
        };
        self.finish_turn(state, completed);
    }

    /// Bitboard fast path of [`Game::place`].
    pub(crate) fn place_indices(&self, state: &mut GameState, idxs: &[usize]) {
        let Geometry::Dense(g) = &self.geometry else { unreachable!("dense only") };
        let Occupancy::Dense { bits, .. } = &mut state.occupancy else { unreachable!("dense only") };
        let mover = state.to_move;
        let p = mover.index();
        for &i in idxs {
            bits[p] |= 1u128 << i;
        }
        state.pieces[p] += idxs.len() as u32;
        let completed = g.completes_line(mover, bits[p], idxs.iter().copied());
        self.finish_turn(state, completed);
    }

    fn finish_turn(&self, state: &mut GameState, completed: bool) {
        let mover = state.to_move;
        state.ply += 1;
        state.to_move = mover.other();
        state.placements_left = self.placements_for(state, state.to_move);
        state.outcome = if completed {
            match self.spec.completion_effect {
                CompletionEffect::Win => Outcome::win_for(mover),
                CompletionEffect::Lose => Outcome::win_for(mover.other()),
            }
        } else if self.board_full(state) || state.ply >= self.spec.max_plies {
            Outcome::Draw
        } else {
            Outcome::Ongoing
        };
    }

    fn placements_for(&self, state: &GameState, player: Player) -> u32 {
        if state.pieces[player.index()] == 0 {
            self.spec.opening_placements(player)
        } else {
            1
        }
    }

    fn board_full(&self, state: &GameState) -> bool {
        match self.spec.board.cells() {
            Some(n) => (state.pieces[0] + state.pieces[1]) as u64 >= n,
            None => false,
        }
    }

    fn set(&self, state: &mut GameState, cell: Cell, player: Player) {
        match (&self.geometry, &mut state.occupancy) {
            (Geometry::Dense(g), Occupancy::Dense { bits, .. }) => {
                bits[player.index()] |= 1u128 << g.index(cell).expect("cell inside the board");
            }
            (_, Occupancy::Sparse(map)) => {
                map.insert(cell, player);
            }
            _ => unreachable!("state does not belong to this game"),
        }
        state.pieces[player.index()] += 1;
    }

    fn sparse_line_through(&self, map: &BTreeMap<Cell, Player>, cell: Cell, player: Player) -> bool {
        let k = self.spec.k(player) as i32;
        let owned = |r: i32, c: i32| map.get(&Cell::new(r, c)) == Some(&player);
        self.spec.line_rule(player).directions().iter().any(|&(dr, dc)| {
            let mut run = 1;
            for sign in [1, -1] {
                let mut i = 1;
                while owned(cell.row + sign * dr * i, cell.col + sign * dc * i) {
                    run += 1;
                    i += 1;
                }
            }
            run >= k
        })
    }

    fn has_line(&self, state: &GameState, player: Player) -> bool {
        match (&self.geometry, &state.occupancy) {
            (Geometry::Dense(g), Occupancy::Dense { bits, .. }) => g.has_line(player, bits[player.index()]),
            (_, Occupancy::Sparse(map)) => map
                .iter()
                .filter(|(_, &p)| p == player)
                .any(|(&c, _)| self.sparse_line_through(map, c, player)),
            _ => unreachable!("state does not belong to this game"),
        }
    }

    fn scan_outcome(&self, state: &GameState) -> Outcome {
        let lines = [self.has_line(state, Player::P1), self.has_line(state, Player::P2)];
        let completer = match lines {
            [true, true] => Some(state.to_move.other()),
            [true, false] => Some(Player::P1),
            [false, true] => Some(Player::P2),
            [false, false] => None,
        };
        match (completer, self.spec.completion_effect) {
            (Some(p), CompletionEffect::Win) => Outcome::win_for(p),
            (Some(p), CompletionEffect::Lose) => Outcome::win_for(p.other()),
            (None, _) if self.board_full(state) || state.ply >= self.spec.max_plies => Outcome::Draw,
            (None, _) => Outcome::Ongoing,
        }
    }

    pub fn canonicalize(&self, state: &GameState) -> CanonicalKey {
        let (to_move, ply, placements_left) = (state.to_move, state.ply, state.placements_left);
        match (&self.geometry, &state.occupancy) {
            (Geometry::Dense(g), Occupancy::Dense { bits, .. }) => {
                let bits = g
                    .symmetries
                    .iter()
                    .map(|perm| [DenseGeometry::transform(perm, bits[0]), DenseGeometry::transform(perm, bits[1])])
                    .min()
                    .expect("identity symmetry");
                CanonicalKey::Dense { bits, to_move, ply, placements_left }
            }
            (_, Occupancy::Sparse(map)) => {
                let cells = match self.spec.board {
                    Board::Finite { rows, cols } => symmetry_maps(rows, cols)
                        .iter()
                        .map(|f| {
                            let mut v: Vec<_> = map
                                .iter()
                                .map(|(c, &p)| {
                                    let (r, c) = f(c.row, c.col);
                                    (r, c, p)
                                })
                                .collect();
                            v.sort_unstable();
                            v
                        })
                        .min()
                        .unwrap_or_default(),
                    Board::Infinite => infinite_canonical(map),
                };
                CanonicalKey::Sparse { cells, to_move, ply, placements_left }
            }
            _ => unreachable!("state does not belong to this game"),
        }
    }

    /// Uniformly random legal move.
    pub(crate) fn random_move<R: Rng + ?Sized>(&self, state: &GameState, rng: &mut R) -> Move {
        if self.is_finite() {
            let mut candidates = self.candidate_cells(state);
            let n = self.move_size(state, candidates.len());
            let mut picked = SmallVec::<[Cell; 2]>::new();
            for _ in 0..n {
                let i = rng.random_range(0..candidates.len());
                picked.push(candidates.swap_remove(i));
            }
            Move::new(picked)
        } else {
            let moves = self.legal_moves(state).expect("non-terminal state");
            moves.choose(rng).expect("infinite boards always have moves").clone()
        }
    }

    /// Uniformly random play until the game ends.
    pub(crate) fn playout<R: Rng + ?Sized>(&self, state: &GameState, rng: &mut R) -> Outcome {
        let mut state = state.clone();
        if let (Geometry::Dense(g), Occupancy::Dense { bits, .. }) = (&self.geometry, &state.occupancy) {
            let mut empty = g.full & !(bits[0] | bits[1]);
            let mut free: SmallVec<[u8; 128]> = SmallVec::new();
            while empty != 0 {
                free.push(empty.trailing_zeros() as u8);
                empty &= empty - 1;
            }
            let mut picked: SmallVec<[usize; 4]> = SmallVec::new();
            while !state.outcome.is_terminal() {
                picked.clear();
                let n = (state.placements_left as usize).min(free.len());
                for _ in 0..n {
                    let i = rng.random_range(0..free.len());
                    picked.push(free.swap_remove(i) as usize);
                }
                self.place_indices(&mut state, &picked);
            }
            return state.outcome;
        }
        while !state.outcome.is_terminal() {
            let mv = self.random_move(&state, rng);
            self.place(&mut state, mv.cells());
        }
        state.outcome
    }

    pub(crate) fn dense(&self) -> Option<&DenseGeometry> {
        match &self.geometry {
            Geometry::Dense(g) => Some(g),
            Geometry::Sparse => None,
        }
    }
}

fn combinations(items: &[Cell], n: usize, cur: &mut SmallVec<[Cell; 2]>, start: usize, out: &mut Vec<Move>) {
    if cur.len() == n {
        out.push(Move::new(cur.iter().copied()));
        return;
    }
    for i in start..items.len() {
        if items.len() - i < n - cur.len() {
            break;
        }
        cur.push(items[i]);
        combinations(items, n, cur, i + 1, out);
        cur.pop();
    }
}

fn frontier(occupied: impl Iterator<Item = Cell>, is_occupied: impl Fn(Cell) -> bool) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    let mut any = false;
    for c in occupied {
        any = true;
        for dr in -2..=2 {
            for dc in -2..=2 {
                let n = Cell::new(c.row + dr, c.col + dc);
                if !is_occupied(n) {
                    out.insert(n);
                }
            }
        }
    }
    if !any {
        out.insert(Cell::new(0, 0));
    }
    out
}

fn infinite_placements(map: &BTreeMap<Cell, Player>, chosen: &mut Vec<Cell>, n: usize, found: &mut BTreeSet<Move>) {
    if chosen.len() == n {
        found.insert(Move::new(chosen.iter().copied()));
        return;
    }
    let taken = |c: Cell| map.contains_key(&c) || chosen.contains(&c);
    let options = frontier(map.keys().chain(chosen.iter()).copied(), taken);
    for c in options {
        chosen.push(c);
        infinite_placements(map, chosen, n, found);
        chosen.pop();
    }
}

/// Infinite-board key: translate the bounding box to the origin under each
/// element of the rectangle group and keep the smallest encoding.
fn infinite_canonical(map: &BTreeMap<Cell, Player>) -> Vec<(i32, i32, Player)> {
    let flips = [(1, 1), (-1, -1), (-1, 1), (1, -1)];
    flips
        .iter()
        .map(|&(sr, sc)| {
            let pts: Vec<_> = map.iter().map(|(c, &p)| (c.row * sr, c.col * sc, p)).collect();
            let min_r = pts.iter().map(|p| p.0).min().unwrap_or(0);
            let min_c = pts.iter().map(|p| p.1).min().unwrap_or(0);
            let mut v: Vec<_> = pts.into_iter().map(|(r, c, p)| (r - min_r, c - min_c, p)).collect();
            v.sort_unstable();
            v
        })
        .min()
        .unwrap_or_default()
}
