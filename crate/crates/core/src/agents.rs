//! Gameplay policies used to evaluate games by simulation, and the
//! self-play payoff estimate built on them.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Board, Cell, CompletionEffect, Game, GameError, GameSpec, GameState, Move, Player};
use crate::mcts::Tree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Random,
    Intuitive,
    Expert,
    Mcts,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::Intuitive => "intuitive",
            AgentKind::Expert => "expert",
            AgentKind::Mcts => "mcts",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub seed: u64,
    pub intuitive_temperature: f64,
    pub expert_depth: u32,
    pub mcts_iterations: u32,
    pub mcts_exploration: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            kind: AgentKind::Random,
            seed: 0,
            intuitive_temperature: 1.0,
            expert_depth: 5,
            mcts_iterations: 1000,
            mcts_exploration: 1.4,
        }
    }
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> AgentConfig {
        AgentConfig { kind, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.expert_depth == 0 {
            return Err(Error::Config("expert_depth must be at least 1".into()));
        }
        if self.mcts_iterations == 0 {
            return Err(Error::Config("mcts_iterations must be at least 1".into()));
        }
        if !(self.intuitive_temperature > 0.0) || !self.intuitive_temperature.is_finite() {
            return Err(Error::Config("intuitive_temperature must be positive".into()));
        }
        if !(self.mcts_exploration > 0.0) || !self.mcts_exploration.is_finite() {
            return Err(Error::Config("mcts_exploration must be positive".into()));
        }
        Ok(())
    }

    /// Same state and same rng position always give the same move.
    fn is_deterministic(&self) -> bool {
        self.kind == AgentKind::Expert
    }
}

/// Picks a legal move for the player to move.
pub fn choose_move<R: Rng + ?Sized>(agent: &AgentConfig, game: &Game, state: &GameState, rng: &mut R) -> Result<Move, GameError> {
    if game.terminal_status(state).is_terminal() {
        return Err(GameError::TerminalState);
    }
    Ok(match agent.kind {
        AgentKind::Random => game.random_move(state, rng),
        AgentKind::Intuitive => intuitive_move(game, state, agent.intuitive_temperature, rng),
        AgentKind::Expert => Expert { game }.choose(state, agent.expert_depth.max(1)),
        AgentKind::Mcts => mcts_move(game, state, agent, rng),
    })
}

fn misere(game: &Game) -> bool {
    game.spec().completion_effect == CompletionEffect::Lose
}

/// Windows of `player`'s length through `cell` that hold none of the
/// opponent's pieces, as counts of `player`'s own pieces in each.
fn open_windows_through(game: &Game, state: &GameState, cell: Cell, player: Player) -> Vec<u32> {
    let spec = game.spec();
    let k = spec.k(player) as i32;
    let mut out = Vec::new();
    for &(dr, dc) in spec.line_rule(player).directions() {
        'window: for offset in 0..k {
            let mut own = 0;
            for i in 0..k {
                let c = Cell::new(cell.row + dr * (i - offset), cell.col + dc * (i - offset));
                if !spec.board.contains(c) {
                    continue 'window;
                }
                match state.get(c) {
                    Some(p) if p == player => own += 1,
                    Some(_) => continue 'window,
                    None => {}
                }
            }
            out.push(own);
        }
    }
    out
}

fn intuitive_cell_score(game: &Game, state: &GameState, cell: Cell) -> f64 {
    let me = state.to_move();
    let gain: u32 = open_windows_through(game, state, cell, me).iter().map(|n| 1 + n).sum();
    let block: u32 = open_windows_through(game, state, cell, me.other()).iter().map(|n| 1 + n).sum();
    let score = (gain + block) as f64;
    if misere(game) {
        -score
    } else {
        score
    }
}

/// Cells where `player`'s next single placement would complete a line.
fn completing_cells(game: &Game, state: &GameState, cells: &[Cell], player: Player) -> Vec<Cell> {
    let need = game.spec().k(player) - 1;
    cells
        .iter()
        .copied()
        .filter(|&c| open_windows_through(game, state, c, player).contains(&need))
        .collect()
}

fn intuitive_move<R: Rng + ?Sized>(game: &Game, state: &GameState, temperature: f64, rng: &mut R) -> Move {
    let me = state.to_move();
    let moves: Vec<Move> = if state.placements_left_this_turn() == 1 {
        game.candidate_cells(state).into_iter().map(Move::single).collect()
    } else {
        game.legal_moves(state).expect("non-terminal state")
    };
    let outcome_of = |mv: &Move| {
        let mut next = state.clone();
        game.place(&mut next, mv.cells());
        game.terminal_status(&next)
    };
    if let Some(win) = moves.iter().find(|mv| outcome_of(mv).winner() == Some(me)) {
        return win.clone();
    }
    let mut pool: Vec<&Move> = moves.iter().collect();
    if misere(game) {
        let safe: Vec<&Move> = pool.iter().copied().filter(|mv| outcome_of(mv).winner() != Some(me.other())).collect();
        if !safe.is_empty() {
            pool = safe;
        }
    } else {
        let cells = game.candidate_cells(state);
        let threats = completing_cells(game, state, &cells, me.other());
        if !threats.is_empty() {
            let blocking: Vec<&Move> =
                pool.iter().copied().filter(|mv| mv.cells().iter().any(|c| threats.contains(c))).collect();
            if !blocking.is_empty() {
                pool = blocking;
            }
        }
    }
    let scores: Vec<f64> = pool
        .iter()
        .map(|mv| mv.cells().iter().map(|&c| intuitive_cell_score(game, state, c)).sum::<f64>() / temperature)
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let dist = WeightedIndex::new(&weights).expect("at least one finite weight");
    pool[dist.sample(rng)].clone()
}

const WIN: f64 = 2.0;
const TEMPO: f64 = 0.01;

struct Expert<'g> {
    game: &'g Game,
}

impl Expert<'_> {
    fn choose(&self, state: &GameState, depth: u32) -> Move {
        let moves = self.moves(state);
        let mut best: Option<(f64, &Move)> = None;
        let mut alpha = f64::NEG_INFINITY;
        for mv in &moves {
            let mut next = state.clone();
            self.game.place(&mut next, mv.cells());
            let v = -self.search(&next, depth - 1, f64::NEG_INFINITY, -alpha);
            // Strict improvement keeps the earliest (row-major lowest) move on ties.
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, mv));
                alpha = v;
            }
        }
        best.expect("non-terminal state has moves").1.clone()
    }

    /// Value for the player to move. Terminal values exceed any heuristic
    /// value, and wins found with more depth to spare score higher.
    fn search(&self, state: &GameState, depth: u32, mut alpha: f64, beta: f64) -> f64 {
        if let Some(p) = self.game.terminal_status(state).payoff() {
            let v = (p * state.to_move().sign()) as f64;
            return if v == 0.0 { 0.0 } else { v * (WIN + TEMPO * depth as f64) };
        }
        if depth == 0 {
            return self.heuristic(state);
        }
        let mover = state.to_move();
        let children: Vec<GameState> = self
            .moves(state)
            .iter()
            .map(|mv| {
                let mut next = state.clone();
                self.game.place(&mut next, mv.cells());
                next
            })
            .collect();
        if children.iter().any(|c| self.game.terminal_status(c).winner() == Some(mover)) {
            return WIN + TEMPO * (depth - 1) as f64;
        }
        let mut best = f64::NEG_INFINITY;
        for child in &children {
            let v = -self.search(child, depth - 1, -beta, -alpha);
            best = best.max(v);
            alpha = alpha.max(v);
            if alpha >= beta {
                break;
            }
        }
        best
    }

    /// Normalised line-potential difference for the player to move, in (-1, 1).
    fn heuristic(&self, state: &GameState) -> f64 {
        let me = state.to_move();
        let mine = potential(self.game, state, me);
        let theirs = potential(self.game, state, me.other());
        let v = (mine - theirs) / (mine + theirs + 1.0);
        if misere(self.game) {
            -v
        } else {
            v
        }
    }

    /// Legal moves, restricted on large boards to cells near existing pieces.
    fn moves(&self, state: &GameState) -> Vec<Move> {
        let spec = self.game.spec();
        let large = matches!(spec.board, Board::Finite { .. }) && spec.board.cells().unwrap_or(0) > EXPERT_FULL_WIDTH_CELLS;
        if !large {
            return self.game.legal_moves(state).expect("non-terminal state");
        }
        let empty = self.game.candidate_cells(state);
        let occupied: Vec<Cell> = state.occupied().into_iter().map(|(c, _)| c).collect();
        let mut near: Vec<Cell> = if occupied.is_empty() {
            let Board::Finite { rows, cols } = spec.board else { unreachable!() };
            let centre = Cell::new((rows as i32 - 1) / 2, (cols as i32 - 1) / 2);
            empty.iter().copied().filter(|c| c.chebyshev(centre) <= 1).collect()
        } else {
            empty.iter().copied().filter(|c| occupied.iter().any(|o| o.chebyshev(*c) <= 2)).collect()
        };
        let n = (state.placements_left_this_turn() as usize).min(empty.len());
        if near.len() < n {
            near = empty;
        }
        let mut out = Vec::new();
        subsets(&near, n, 0, &mut Vec::new(), &mut out);
        out
    }
}

/// Finite boards above this size search only cells near existing pieces.
const EXPERT_FULL_WIDTH_CELLS: u64 = 25;

fn subsets(items: &[Cell], n: usize, start: usize, cur: &mut Vec<Cell>, out: &mut Vec<Move>) {
    if cur.len() == n {
        out.push(Move::new(cur.iter().copied()));
        return;
    }
    for i in start..items.len() {
        cur.push(items[i]);
        subsets(items, n, i + 1, cur, out);
        cur.pop();
    }
}

fn window_weight(own: u32) -> f64 {
    4f64.powi(own as i32) - 1.0
}

/// Sum over `player`'s windows free of opponent pieces of `4^own - 1`.
fn potential(game: &Game, state: &GameState, player: Player) -> f64 {
    if let (Some(g), Some(bits)) = (game.dense(), state.dense_bits()) {
        let (own, theirs) = (bits[player.index()], bits[player.other().index()]);
        return g.windows[player.index()]
            .iter()
            .filter(|&&w| w & theirs == 0)
            .map(|&w| window_weight((w & own).count_ones()))
            .sum();
    }
    let spec = game.spec();
    let k = spec.k(player) as i32;
    let mut seen = std::collections::HashSet::new();
    let mut total = 0.0;
    for (cell, owner) in state.occupied() {
        if owner != player {
            continue;
        }
        for &(dr, dc) in spec.line_rule(player).directions() {
            'window: for offset in 0..k {
                let start = Cell::new(cell.row - dr * offset, cell.col - dc * offset);
                if !seen.insert((start, dr, dc)) {
                    continue;
                }
                let mut own = 0;
                for i in 0..k {
                    let c = Cell::new(start.row + dr * i, start.col + dc * i);
                    if !spec.board.contains(c) {
                        continue 'window;
                    }
                    match state.get(c) {
                        Some(p) if p == player => own += 1,
                        Some(_) => continue 'window,
                        None => {}
                    }
                }
                total += window_weight(own);
            }
        }
    }
    total
}

fn mcts_move<R: Rng + ?Sized>(game: &Game, state: &GameState, agent: &AgentConfig, rng: &mut R) -> Move {
    let mut tree = Tree::new(game, state.clone(), agent.mcts_exploration, false);
    for _ in 0..agent.mcts_iterations {
        tree.iterate(rng);
    }
    let mut children = tree.root_children();
    children.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    children.into_iter().next().expect("root was expanded").0
}

/// Self-play statistics for one spec and agent pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffEstimate {
    pub p_win: f64,
    pub p_draw: f64,
    pub p_loss: f64,
    pub payoff_mean: f64,
    pub per_game_payoffs: Vec<i8>,
}

impl PayoffEstimate {
    pub fn from_payoffs(per_game_payoffs: Vec<i8>) -> PayoffEstimate {
        let n = per_game_payoffs.len();
        let count = |v: i8| per_game_payoffs.iter().filter(|&&p| p == v).count();
        let (wins, draws) = (count(1), count(0));
        let losses = n - wins - draws;
        let (p_win, p_draw) = (wins as f64 / n as f64, draws as f64 / n as f64);
        PayoffEstimate {
            p_win,
            p_draw,
            // Complement of the rounded sum, so the three add to exactly 1.
            p_loss: 1.0 - (p_win + p_draw),
            payoff_mean: (wins as f64 - losses as f64) / n as f64,
            per_game_payoffs,
        }
    }
}

pub const DEFAULT_N_GAMES: u32 = 1000;

/// Rng for game `index` of a batch seeded with `seed`.
pub fn game_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Plays one game from the initial state and returns its player-1 payoff.
pub fn play_game<R: Rng + ?Sized>(game: &Game, p1: &AgentConfig, p2: &AgentConfig, rng: &mut R) -> i8 {
    let mut state = game.initial_state();
    loop {
        if let Some(p) = game.terminal_status(&state).payoff() {
            return p;
        }
        let agent = if state.to_move() == Player::P1 { p1 } else { p2 };
        let mv = choose_move(agent, game, &state, rng).expect("non-terminal state");
        game.place(&mut state, mv.cells());
    }
}

/// Plays `n_games` games between `p1` and `p2`. Game `i` draws from its own
/// rng stream, so results do not depend on scheduling. When both agents are
/// deterministic every game is identical and only one is played.
pub fn agent_payoff_estimate(
    spec: &GameSpec,
    p1: &AgentConfig,
    p2: &AgentConfig,
    n_games: u32,
    seed: u64,
) -> Result<PayoffEstimate> {
    if n_games == 0 {
        return Err(Error::Config("n_games must be at least 1".into()));
    }
    p1.validate()?;
    p2.validate()?;
    let game = Game::new(spec.clone())?;
    let payoffs: Vec<i8> = if p1.is_deterministic() && p2.is_deterministic() {
        let p = play_game(&game, p1, p2, &mut game_rng(seed, 0));
        vec![p; n_games as usize]
    } else {
        (0..n_games as u64).into_par_iter().map(|i| play_game(&game, p1, p2, &mut game_rng(seed, i))).collect()
    };
    Ok(PayoffEstimate::from_payoffs(payoffs))
}
