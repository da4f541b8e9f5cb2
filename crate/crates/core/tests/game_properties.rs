mod common {
    pub mod oracle;
}

use std::sync::LazyLock;

use common::oracle::{scan_has_line, scan_outcome};
use gameeval::agents::game_rng;
use gameeval::corpus::CategoryTemplate;
use gameeval::game::{Board, Category, CompletionEffect, Game, GameSpec, GameState, Move, Outcome, Player};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;

static ALL_SPECS: LazyLock<Vec<GameSpec>> =
    LazyLock::new(|| CategoryTemplate::all_standard().iter().flat_map(|t| t.candidates()).collect());

fn seat(p: Player) -> u8 {
    match p {
        Player::P1 => 1,
        Player::P2 => 2,
    }
}

fn oracle_cells(state: &GameState) -> Vec<(i32, i32, u8)> {
    state.occupied().into_iter().map(|(c, p)| (c.row, c.col, seat(p))).collect()
}

/// Plays one uniformly random game, checking every step against the scan
/// oracle and the placement rules. Returns the number of states visited.
fn checked_playout<R: Rng>(game: &Game, rng: &mut R) -> usize {
    let spec = game.spec();
    let mut state = game.initial_state();
    let mut visited = 1;
    while !game.terminal_status(&state).is_terminal() {
        let moves = game.legal_moves(&state).unwrap();
        assert!(!moves.is_empty());
        let mv: &Move = moves.choose(rng).unwrap();
        for c in mv.cells() {
            assert!(state.get(*c).is_none(), "{}: legal move onto occupied {c}", spec.game_id);
        }
        let mover = state.to_move();
        let next = game.apply_move(&state, mv).unwrap();
        assert_eq!(next.ply(), state.ply() + 1);
        let before = state.piece_count(Player::P1) + state.piece_count(Player::P2);
        let after = next.piece_count(Player::P1) + next.piece_count(Player::P2);
        assert_eq!(after, before + mv.len() as u32);
        let cells = oracle_cells(&next);
        let mut distinct = cells.iter().map(|&(r, c, _)| (r, c)).collect::<Vec<_>>();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), cells.len(), "double occupancy");

        let outcome = game.terminal_status(&next);
        assert_eq!(outcome, scan_outcome(spec, &cells, seat(mover), next.ply()), "{} at ply {}", spec.game_id, next.ply());
        if spec.completion_effect == CompletionEffect::Lose
            && scan_has_line(&cells, seat(mover), spec.k(mover), spec.line_rule(mover))
        {
            assert_eq!(outcome.winner(), Some(mover.other()), "misere completion must lose");
        }
        if spec.board == Board::Infinite {
            assert!(next.ply() <= spec.max_plies);
        }
        state = next;
        visited += 1;
    }
    if spec.board == Board::Infinite {
        assert!(state.ply() <= spec.max_plies);
    }
    visited
}

#[test]
fn ten_thousand_states_per_category_match_the_scan_oracle() {
    for category in Category::ALL {
        let specs: Vec<&GameSpec> = ALL_SPECS.iter().filter(|s| s.category == category).collect();
        let mut visited = 0;
        let mut i = 0;
        while visited < 10_000 {
            let mut rng = game_rng(category as u64, i);
            let spec = specs.choose(&mut rng).unwrap();
            let game = Game::new((*spec).clone()).unwrap();
            visited += checked_playout(&game, &mut rng);
            i += 1;
        }
    }
}

/// The board symmetries a spec's rules are invariant under, as maps on
/// `(row, col)`. Line rules only distinguish diagonal from orthogonal lines,
/// so every reflection and rotation of the board preserves them.
fn symmetries(board: Board) -> Vec<Box<dyn Fn(i32, i32) -> (i32, i32)>> {
    match board {
        Board::Finite { rows, cols } => {
            let (r1, c1) = (rows as i32 - 1, cols as i32 - 1);
            let mut out: Vec<Box<dyn Fn(i32, i32) -> (i32, i32)>> = vec![
                Box::new(|r, c| (r, c)),
                Box::new(move |r, c| (r1 - r, c)),
                Box::new(move |r, c| (r, c1 - c)),
                Box::new(move |r, c| (r1 - r, c1 - c)),
            ];
            if rows == cols {
                out.push(Box::new(|r, c| (c, r)));
                out.push(Box::new(move |r, c| (c1 - c, r)));
                out.push(Box::new(move |r, c| (c, r1 - r)));
                out.push(Box::new(move |r, c| (c1 - c, r1 - r)));
            }
            out
        }
        Board::Infinite => vec![
            Box::new(|r, c| (r, c)),
            Box::new(|r, c| (-r, c)),
            Box::new(|r, c| (r, -c)),
            Box::new(|r, c| (-r, -c)),
            Box::new(|r, c| (r + 7, c - 3)),
            Box::new(|r, c| (-r - 2, c + 11)),
        ],
    }
}

fn random_position<R: Rng>(game: &Game, plies: usize, rng: &mut R) -> GameState {
    let mut state = game.initial_state();
    for _ in 0..plies {
        if game.terminal_status(&state).is_terminal() {
            break;
        }
        let moves = game.legal_moves(&state).unwrap();
        state = game.apply_move(&state, moves.choose(rng).unwrap()).unwrap();
    }
    state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_games_follow_the_rules(idx in 0..ALL_SPECS.len(), seed in any::<u64>()) {
        let game = Game::new(ALL_SPECS[idx].clone()).unwrap();
        checked_playout(&game, &mut game_rng(seed, 0));
    }

    #[test]
    fn canonical_key_is_constant_on_symmetry_orbits(idx in 0..ALL_SPECS.len(), plies in 0usize..12, seed in any::<u64>()) {
        let game = Game::new(ALL_SPECS[idx].clone()).unwrap();
        let state = random_position(&game, plies, &mut game_rng(seed, 1));
        let key = game.canonicalize(&state);
        prop_assert_eq!(&game.canonicalize(&state), &key);
        let mut representative = None;
        for f in symmetries(game.spec().board) {
            let cells: Vec<_> = state.occupied().into_iter().map(|(c, p)| (f(c.row, c.col), p)).collect();
            let image = game.state_from_cells(cells, state.to_move()).unwrap();
            let image_key = game.canonicalize(&image);
            prop_assert_eq!(&image_key, &key);
            representative.get_or_insert(image);
        }
        // Canonicalising any member of the orbit again changes nothing.
        let again = game.canonicalize(&representative.unwrap());
        prop_assert_eq!(again, key);
    }

    #[test]
    fn spec_serialization_round_trips(idx in 0..ALL_SPECS.len()) {
        let spec = &ALL_SPECS[idx];
        let text = serde_json::to_string(spec).unwrap();
        prop_assert_eq!(&serde_json::from_str::<GameSpec>(&text).unwrap(), spec);
    }
}

#[test]
fn opening_double_placement_is_one_ply() {
    let spec = CategoryTemplate::standard(Category::FirstPlayerMovesTwo).instantiate(Board::square(3), 3);
    let game = Game::new(spec).unwrap();
    let s0 = game.initial_state();
    let s1 = game.apply_move(&s0, &Move::new([(0, 0), (2, 2)])).unwrap();
    assert_eq!((s1.ply(), s1.to_move(), s1.piece_count(Player::P1)), (1, Player::P2, 2));
    assert!(game.apply_move(&s1, &Move::new([(0, 1), (0, 2)])).is_err());
    assert_eq!(game.terminal_status(&s1), Outcome::Ongoing);
}
