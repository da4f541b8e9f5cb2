//! UCT tree search shared by the MCTS agent and the convergence-gated value
//! estimator.
//!
//! Values are player-1 payoffs in `[-1, 1]`. With `prove` enabled every node
//! also carries proven lower/upper bounds on its minimax value (score-bounded
//! MCTS): terminal leaves are exact, bounds propagate to ancestors, and
//! selection skips children that are solved or cannot move the parent's
//! bounds. A solved root freezes the estimate at its exact value.

use rand::Rng;

use crate::game::{Game, GameState, Move, Player};

#[derive(Clone, Debug)]
enum Untried {
    /// Single-placement turns on bitboards: the unexpanded cell indices.
    Cells(u128),
    Moves(Vec<Move>),
}

impl Untried {
    fn is_empty(&self) -> bool {
        match self {
            Untried::Cells(m) => *m == 0,
            Untried::Moves(v) => v.is_empty(),
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    state: GameState,
    mv: Option<Move>,
    children: Vec<u32>,
    untried: Untried,
    visits: u32,
    sum: f64,
    lo: i8,
    hi: i8,
}

pub(crate) struct Tree<'g> {
    game: &'g Game,
    nodes: Vec<Node>,
    exploration: f64,
    prove: bool,
}

impl<'g> Tree<'g> {
    pub fn new(game: &'g Game, root: GameState, exploration: f64, prove: bool) -> Tree<'g> {
        let mut tree = Tree { game, nodes: Vec::new(), exploration, prove };
        tree.push(root, None);
        tree
    }

    fn push(&mut self, state: GameState, mv: Option<Move>) -> u32 {
        let outcome = self.game.terminal_status(&state);
        let (untried, lo, hi) = match outcome.payoff() {
            Some(v) => (Untried::Moves(Vec::new()), v, v),
            None => {
                let untried = match (self.game.dense(), state.dense_bits()) {
                    (Some(g), Some(bits)) if state.placements_left_this_turn() == 1 => {
                        Untried::Cells(g.full & !(bits[0] | bits[1]))
                    }
                    _ => Untried::Moves(self.game.legal_moves(&state).expect("non-terminal state")),
                };
                (untried, -1, 1)
            }
        };
        self.nodes.push(Node { state, mv, children: Vec::new(), untried, visits: 0, sum: 0.0, lo, hi });
        (self.nodes.len() - 1) as u32
    }

    pub fn root_solved(&self) -> Option<i8> {
        let root = &self.nodes[0];
        (self.prove && root.lo == root.hi).then_some(root.lo)
    }

    /// Mean player-1 payoff of all backups through the root, or the proven
    /// value once the root is solved.
    pub fn root_value(&self) -> f64 {
        if let Some(v) = self.root_solved() {
            return v as f64;
        }
        let root = &self.nodes[0];
        if root.visits == 0 {
            0.0
        } else {
            root.sum / root.visits as f64
        }
    }

    /// One select / expand / playout / backup pass.
    pub fn iterate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut path = vec![0u32];
        let mut node = 0u32;
        loop {
            let n = &self.nodes[node as usize];
            // Terminal, or proven when solving.
            if n.lo == n.hi {
                break;
            }
            if !n.untried.is_empty() {
                node = self.expand(node, rng);
                path.push(node);
                break;
            }
            match self.select(node) {
                Some(child) => {
                    node = child;
                    path.push(node);
                }
                None => break,
            }
        }
        let leaf = &self.nodes[node as usize];
        let value = match self.game.terminal_status(&leaf.state).payoff() {
            Some(v) => v as f64,
            None if self.prove && leaf.lo == leaf.hi => leaf.lo as f64,
            None => self.game.playout(&leaf.state, rng).payoff().expect("terminal") as f64,
        };
        for &i in path.iter().rev() {
            let n = &mut self.nodes[i as usize];
            n.visits += 1;
            n.sum += value;
            if self.prove {
                self.update_bounds(i);
            }
        }
    }

    fn expand<R: Rng + ?Sized>(&mut self, node: u32, rng: &mut R) -> u32 {
        let n = &mut self.nodes[node as usize];
        let mv = match &mut n.untried {
            Untried::Cells(mask) => {
                let count = mask.count_ones();
                let mut pick = rng.random_range(0..count);
                let mut m = *mask;
                let mut idx = m.trailing_zeros();
                while pick > 0 {
                    m &= m - 1;
                    idx = m.trailing_zeros();
                    pick -= 1;
                }
                *mask &= !(1u128 << idx);
                let cell = self.game.dense().expect("dense board").cell(idx as usize);
                Move::single(cell)
            }
            Untried::Moves(moves) => {
                let i = rng.random_range(0..moves.len());
                moves.swap_remove(i)
            }
        };
        let mut state = self.nodes[node as usize].state.clone();
        self.game.place(&mut state, mv.cells());
        let child = self.push(state, Some(mv));
        self.nodes[node as usize].children.push(child);
        child
    }

    fn select(&self, node: u32) -> Option<u32> {
        let n = &self.nodes[node as usize];
        let maximizing = n.state.to_move() == Player::P1;
        let ln_n = (n.visits.max(1) as f64).ln();
        let mut best: Option<(f64, u32)> = None;
        for &c in &n.children {
            let ch = &self.nodes[c as usize];
            if self.prove {
                let solved = ch.lo == ch.hi;
                let dominated = if maximizing { ch.hi <= n.lo } else { ch.lo >= n.hi };
                if solved || dominated {
                    continue;
                }
            }
            let mean = if ch.visits == 0 { 0.0 } else { ch.sum / ch.visits as f64 };
            let exploit = if maximizing { mean } else { -mean };
            let score = exploit + self.exploration * (ln_n / (ch.visits as f64 + 1e-9)).sqrt();
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, c));
            }
        }
        best.map(|(_, c)| c)
    }

    fn update_bounds(&mut self, node: u32) {
        let n = &self.nodes[node as usize];
        if n.children.is_empty() && n.untried.is_empty() {
            return;
        }
        let maximizing = n.state.to_move() == Player::P1;
        let open = !n.untried.is_empty();
        let (mut lo, mut hi) = if maximizing { (-1i8, if open { 1 } else { -1 }) } else { (if open { -1 } else { 1 }, 1i8) };
        if maximizing {
            for &c in &n.children {
                let ch = &self.nodes[c as usize];
                lo = lo.max(ch.lo);
                if !open {
                    hi = hi.max(ch.hi);
                }
            }
        } else {
            for &c in &n.children {
                let ch = &self.nodes[c as usize];
                hi = hi.min(ch.hi);
                if !open {
                    lo = lo.min(ch.lo);
                }
            }
        }
        let n = &mut self.nodes[node as usize];
        n.lo = lo;
        n.hi = hi;
    }

    /// Root children as `(move, visits, mean player-1 value)`.
    pub fn root_children(&self) -> Vec<(Move, u32, f64)> {
        self.nodes[0]
            .children
            .iter()
            .map(|&c| {
                let ch = &self.nodes[c as usize];
                let mean = if ch.visits == 0 { 0.0 } else { ch.sum / ch.visits as f64 };
                (ch.mv.clone().expect("child has a move"), ch.visits, mean)
            })
            .collect()
    }

    #[cfg(test)]
    pub fn root_visits(&self) -> u32 {
        self.nodes[0].visits
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::game::GameSpec;

    #[test]
    fn root_child_visits_sum_to_iterations() {
        let game = Game::new(GameSpec::tic_tac_toe()).unwrap();
        let mut tree = Tree::new(&game, game.initial_state(), 1.4, false);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            tree.iterate(&mut rng);
        }
        let total: u32 = tree.root_children().iter().map(|c| c.1).sum();
        assert_eq!(total, 500);
        assert_eq!(tree.root_visits(), 500);
    }

    #[test]
    fn proves_tiny_game() {
        let game = Game::new(GameSpec::k_in_a_row(2, 2, 2)).unwrap();
        let mut tree = Tree::new(&game, game.initial_state(), 1.4, true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            tree.iterate(&mut rng);
        }
        assert_eq!(tree.root_solved(), Some(1));
    }
}
