//! Game-theoretic value of a spec: exact alpha-beta negamax where the tree
//! fits a node budget, otherwise a convergence-gated MCTS estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::game::{CanonicalKey, Game, GameError, GameSpec, GameState};
use crate::mcts::Tree;

pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;
pub const DEFAULT_MCTS_ITERATIONS: u32 = 200_000;
pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bound {
    Exact,
    Lower,
    Upper,
}

struct Negamax<'g> {
    game: &'g Game,
    table: FxHashMap<CanonicalKey, (i8, Bound)>,
    nodes: u64,
    budget: u64,
}

struct OutOfBudget;

impl Negamax<'_> {
    /// Value for the player to move.
    fn search(&mut self, state: &GameState, mut alpha: i8, mut beta: i8) -> Result<i8, OutOfBudget> {
        if let Some(p) = self.game.terminal_status(state).payoff() {
            return Ok(p * state.to_move().sign());
        }
        let key = self.game.canonicalize(state);
        if let Some(&(v, bound)) = self.table.get(&key) {
            match bound {
                Bound::Exact => return Ok(v),
                Bound::Lower => alpha = alpha.max(v),
                Bound::Upper => beta = beta.min(v),
            }
            if alpha >= beta {
                return Ok(v);
            }
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(OutOfBudget);
        }
        let mover = state.to_move();
        let children: Vec<GameState> = self
            .game
            .legal_moves(state)
            .expect("non-terminal state")
            .iter()
            .map(|mv| {
                let mut next = state.clone();
                self.game.place(&mut next, mv.cells());
                next
            })
            .collect();
        if children.iter().any(|c| self.game.terminal_status(c).winner() == Some(mover)) {
            self.table.insert(key, (1, Bound::Exact));
            return Ok(1);
        }
        let alpha_in = alpha;
        let mut best = -1i8;
        for child in &children {
            let v = -self.search(child, -beta, -alpha)?;
            best = best.max(v);
            alpha = alpha.max(v);
            if alpha >= beta {
                break;
            }
        }
        let bound = if best <= alpha_in {
            Bound::Upper
        } else if best >= beta {
            Bound::Lower
        } else {
            Bound::Exact
        };
        self.table.insert(key, (best, bound));
        Ok(best)
    }
}

/// Outcome of an exact solve attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactSolve {
    /// Player-1 minimax value, absent when the node budget ran out.
    pub value: Option<i8>,
    pub nodes: u64,
}

/// Exact player-1 minimax value. Infinite boards are never solved.
pub fn solve_exact(spec: &GameSpec, node_budget: u64) -> Result<ExactSolve, GameError> {
    let game = Game::new(spec.clone())?;
    Ok(solve_game(&game, node_budget))
}

fn solve_game(game: &Game, node_budget: u64) -> ExactSolve {
    if !game.is_finite() {
        return ExactSolve { value: None, nodes: 0 };
    }
    let mut search = Negamax { game, table: FxHashMap::default(), nodes: 0, budget: node_budget };
    let root = game.initial_state();
    let value = search.search(&root, -1, 1).ok().map(|v| v * root.to_move().sign());
    ExactSolve { value, nodes: search.nodes }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MctsEstimateConfig {
    pub iterations: u32,
    pub epsilon: f64,
    /// Trailing iterations over which the root value must stay within
    /// `epsilon` of the reported integer.
    pub window: u32,
    pub exploration: f64,
    pub seed: u64,
}

impl Default for MctsEstimateConfig {
    fn default() -> Self {
        MctsEstimateConfig::with_iterations(DEFAULT_MCTS_ITERATIONS)
    }
}

impl MctsEstimateConfig {
    /// Default gate (epsilon 0.05, window 10% of the iterations).
    pub fn with_iterations(iterations: u32) -> Self {
        MctsEstimateConfig {
            iterations,
            epsilon: DEFAULT_EPSILON,
            window: (iterations / 10).max(1),
            exploration: 1.4,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MctsEstimate {
    /// Converged integer payoff, absent when the gate was not met.
    pub value: Option<i8>,
    pub root_value: f64,
    /// Iterations actually searched; a proven root ends the search early.
    pub iterations_run: u32,
    pub proven: bool,
}

/// Root-value MCTS self-play estimate with a convergence gate: returns the
/// nearest `v` in {-1, 0, 1} only if the root value stayed within `epsilon`
/// of `v` for each of the final `window` iterations.
pub fn estimate_via_mcts(spec: &GameSpec, config: &MctsEstimateConfig) -> Result<MctsEstimate, GameError> {
    if config.window > config.iterations || config.iterations == 0 || config.window == 0 {
        return Err(GameError::InvalidSpec(format!(
            "mcts gate needs 1 <= window ({}) <= iterations ({})",
            config.window, config.iterations
        )));
    }
    let game = Game::new(spec.clone())?;
    Ok(estimate_game(&game, config))
}

fn estimate_game(game: &Game, config: &MctsEstimateConfig) -> MctsEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tree = Tree::new(game, game.initial_state(), config.exploration, true);
    // Last iteration (1-based) at which the root value strayed from -1, 0, 1.
    let mut last_miss = [0u32; 3];
    let mut run = 0;
    while run < config.iterations {
        if tree.root_solved().is_some() {
            // Frozen at the proven value for every remaining iteration.
            break;
        }
        tree.iterate(&mut rng);
        run += 1;
        let v = tree.root_value();
        for (slot, target) in last_miss.iter_mut().zip([-1.0, 0.0, 1.0]) {
            if (v - target).abs() > config.epsilon {
                *slot = run;
            }
        }
    }
    let root_value = tree.root_value();
    let nearest = root_value.round().clamp(-1.0, 1.0) as i8;
    let converged = last_miss[(nearest + 1) as usize] <= config.iterations - config.window;
    MctsEstimate {
        value: converged.then_some(nearest),
        root_value,
        iterations_run: run,
        proven: tree.root_solved().is_some(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Exact,
    Mcts,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverPolicy {
    pub node_budget: u64,
    /// Finite boards with more cells than this skip the exact search.
    pub exact_max_cells: u64,
    /// `None` disables the MCTS fallback.
    pub mcts: Option<MctsEstimateConfig>,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        SolverPolicy { node_budget: DEFAULT_NODE_BUDGET, exact_max_cells: 25, mcts: Some(MctsEstimateConfig::default()) }
    }
}

/// Persisted solve result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub game_id: String,
    pub value: Option<i8>,
    pub method: SolveMethod,
    pub nodes_or_iterations: u64,
    pub seed: u64,
}

/// Exact value when the search fits the budget, else the MCTS estimate,
/// else absent. The record names the method that produced the result.
pub fn game_theoretic_payoff(spec: &GameSpec, policy: &SolverPolicy) -> Result<SolveRecord, GameError> {
    let game = Game::new(spec.clone())?;
    let fits = spec.board.cells().is_some_and(|n| n <= policy.exact_max_cells);
    let mut nodes = 0;
    if fits {
        let exact = solve_game(&game, policy.node_budget);
        nodes = exact.nodes;
        if let Some(v) = exact.value {
            return Ok(SolveRecord {
                game_id: spec.game_id.clone(),
                value: Some(v),
                method: SolveMethod::Exact,
                nodes_or_iterations: exact.nodes,
                seed: 0,
            });
        }
    }
    Ok(match &policy.mcts {
        Some(cfg) => {
            let est = estimate_game(&game, cfg);
            SolveRecord {
                game_id: spec.game_id.clone(),
                value: est.value,
                method: SolveMethod::Mcts,
                nodes_or_iterations: est.iterations_run as u64,
                seed: cfg.seed,
            }
        }
        None => SolveRecord {
            game_id: spec.game_id.clone(),
            value: None,
            method: SolveMethod::None,
            nodes_or_iterations: nodes,
            seed: 0,
        },
    })
}
