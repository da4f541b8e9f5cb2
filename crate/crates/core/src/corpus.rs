//! Game corpora: the category templates, the seeded generator, the literal
//! example games, and the line-delimited corpus file.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Board, Category, CompletionEffect, GameSpec, LineRule, DEFAULT_INFINITE_MAX_PLIES};

pub const CORPUS_FORMAT: &str = "gameeval-corpus";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoardShape {
    Square,
    /// Strictly rectangular, stored with rows < cols.
    Rectangle,
    /// Square or rectangular, stored with rows <= cols.
    Any,
    Infinite,
}

/// Parameter ranges for sampling games of one category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryTemplate {
    pub category: Category,
    pub shape: BoardShape,
    pub dims: RangeInclusive<u32>,
    /// Line length for player 1 (player 2 follows the category rule).
    pub k: RangeInclusive<u32>,
    /// Only keep boards on which player 1 can complete a line.
    pub require_winnable: bool,
    pub infinite_max_plies: u32,
}

impl CategoryTemplate {
    pub fn standard(category: Category) -> CategoryTemplate {
        let shape = match category {
            Category::KInARowSquare => BoardShape::Square,
            Category::KInARowRectangle => BoardShape::Rectangle,
            Category::InfiniteBoard => BoardShape::Infinite,
            _ => BoardShape::Any,
        };
        let k = match category {
            Category::InfiniteBoard => 3..=8,
            Category::KInARowLoses => 3..=5,
            _ => 3..=10,
        };
        CategoryTemplate {
            category,
            shape,
            dims: 3..=10,
            k,
            require_winnable: true,
            infinite_max_plies: DEFAULT_INFINITE_MAX_PLIES,
        }
    }

    pub fn all_standard() -> Vec<CategoryTemplate> {
        Category::ALL.into_iter().map(CategoryTemplate::standard).collect()
    }

    /// The category's rules applied to one board and line length.
    pub fn instantiate(&self, board: Board, k: u32) -> GameSpec {
        let (rows, cols) = match board {
            Board::Finite { rows, cols } => (rows, cols),
            Board::Infinite => (0, 0),
        };
        let max_plies = match board {
            Board::Finite { .. } => (rows * cols).max(1),
            Board::Infinite => self.infinite_max_plies,
        };
        let mut spec = GameSpec {
            board,
            k_p1: k,
            k_p2: k,
            line_rule_p1: LineRule::All,
            line_rule_p2: LineRule::All,
            completion_effect: CompletionEffect::Win,
            opening_placements_p1: 1,
            opening_placements_p2: 1,
            max_plies,
            game_id: String::new(),
            category: self.category,
        };
        match self.category {
            Category::KInARowSquare | Category::KInARowRectangle | Category::InfiniteBoard => {}
            Category::KInARowLoses => spec.completion_effect = CompletionEffect::Lose,
            Category::NoDiagonalWin => {
                spec.line_rule_p1 = LineRule::NoDiagonal;
                spec.line_rule_p2 = LineRule::NoDiagonal;
            }
            Category::OnlyDiagonalWin => {
                spec.line_rule_p1 = LineRule::OnlyDiagonal;
                spec.line_rule_p2 = LineRule::OnlyDiagonal;
            }
            Category::FirstPlayerMovesTwo => spec.opening_placements_p1 = 2,
            Category::SecondPlayerMovesTwo => spec.opening_placements_p2 = 2,
            Category::FirstPlayerNoDiagonal => spec.line_rule_p1 = LineRule::NoDiagonal,
            Category::FirstPlayerOnlyDiagonal => spec.line_rule_p1 = LineRule::OnlyDiagonal,
            Category::SecondPlayerKMinusOne => spec.k_p2 = k.saturating_sub(1),
        }
        spec.game_id = game_id(&spec);
        spec
    }

    fn boards(&self) -> Vec<Board> {
        let dims = self.dims.clone();
        match self.shape {
            BoardShape::Infinite => vec![Board::Infinite],
            BoardShape::Square => dims.map(Board::square).collect(),
            BoardShape::Rectangle | BoardShape::Any => {
                let strict = self.shape == BoardShape::Rectangle;
                let mut out = Vec::new();
                for rows in dims.clone() {
                    for cols in dims.clone() {
                        if rows < cols || (!strict && rows == cols) {
                            out.push(Board::Finite { rows, cols });
                        }
                    }
                }
                out
            }
        }
    }

    /// Every spec the template can produce, in a fixed order.
    pub fn candidates(&self) -> Vec<GameSpec> {
        let mut out = Vec::new();
        for board in self.boards() {
            for k in self.k.clone() {
                if k < 2 || (self.category == Category::SecondPlayerKMinusOne && k < 3) {
                    continue;
                }
                let spec = self.instantiate(board, k);
                if self.require_winnable && !winnable(&spec) {
                    continue;
                }
                out.push(spec);
            }
        }
        out
    }
}

/// Whether player 1 has at least one line it could complete.
pub fn winnable(spec: &GameSpec) -> bool {
    match spec.board {
        Board::Infinite => true,
        Board::Finite { rows, cols } => {
            let reach = match spec.line_rule_p1 {
                LineRule::All | LineRule::NoDiagonal => rows.max(cols),
                LineRule::OnlyDiagonal => rows.min(cols),
            };
            spec.k_p1 <= reach
        }
    }
}

fn game_id(spec: &GameSpec) -> String {
    let slug = match spec.category {
        Category::KInARowSquare => "square",
        Category::KInARowRectangle => "rect",
        Category::InfiniteBoard => "infinite",
        Category::KInARowLoses => "loses",
        Category::NoDiagonalWin => "nodiag",
        Category::OnlyDiagonalWin => "onlydiag",
        Category::FirstPlayerMovesTwo => "p1-two",
        Category::SecondPlayerMovesTwo => "p2-two",
        Category::FirstPlayerNoDiagonal => "p1-nodiag",
        Category::FirstPlayerOnlyDiagonal => "p1-onlydiag",
        Category::SecondPlayerKMinusOne => "p2-kminus1",
    };
    match spec.board {
        Board::Finite { rows, cols } => format!("{slug}-{rows}x{cols}-k{}", spec.k_p1),
        Board::Infinite => format!("{slug}-k{}", spec.k_p1),
    }
}

/// The example game of each category plus standard Tic-Tac-Toe.
pub fn example_games() -> Vec<GameSpec> {
    let t = CategoryTemplate::standard;
    vec![
        GameSpec::tic_tac_toe(),
        t(Category::KInARowSquare).instantiate(Board::square(10), 7),
        t(Category::KInARowRectangle).instantiate(Board::Finite { rows: 4, cols: 9 }, 4),
        t(Category::InfiniteBoard).instantiate(Board::Infinite, 5),
        t(Category::KInARowLoses).instantiate(Board::square(4), 3),
        t(Category::NoDiagonalWin).instantiate(Board::square(10), 4),
        t(Category::OnlyDiagonalWin).instantiate(Board::square(5), 4),
        t(Category::FirstPlayerMovesTwo).instantiate(Board::square(3), 3),
        t(Category::SecondPlayerMovesTwo).instantiate(Board::square(10), 10),
        t(Category::FirstPlayerNoDiagonal).instantiate(Board::square(3), 3),
        t(Category::FirstPlayerOnlyDiagonal).instantiate(Board::square(7), 4),
        t(Category::SecondPlayerKMinusOne).instantiate(Board::square(5), 3),
    ]
}

/// Samples `count_per_category` games per template, always prefixed by the
/// example games. Rule-identical games (up to board transposition) are
/// emitted once.
pub fn generate_corpus(templates: &[CategoryTemplate], count_per_category: usize, seed: u64) -> Result<Vec<GameSpec>> {
    if count_per_category == 0 {
        return Err(Error::Config("count_per_category must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut corpus = Vec::new();
    for spec in example_games() {
        if seen.insert(spec.canonical_rules()) {
            corpus.push(spec);
        }
    }
    for template in templates {
        let mut candidates = template.candidates();
        if candidates.is_empty() {
            return Err(Error::Config(format!(
                "template for {} cannot produce a winnable game (k {:?}, dims {:?})",
                template.category, template.k, template.dims
            )));
        }
        candidates.shuffle(&mut rng);
        let mut taken = 0;
        for spec in candidates {
            if taken == count_per_category {
                break;
            }
            if seen.insert(spec.canonical_rules()) {
                corpus.push(spec);
                taken += 1;
            }
        }
        if taken < count_per_category {
            log::warn!("{}: only {taken} distinct games available", template.category);
        }
    }
    Ok(corpus)
}

/// Every winnable spec with at most `max_cells` cells (boards at least
/// 2 wide, k up to 4) across the finite categories, deduplicated.
pub fn small_board_suite(max_cells: u32) -> Vec<GameSpec> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for category in Category::ALL {
        if category == Category::InfiniteBoard {
            continue;
        }
        let template = CategoryTemplate {
            dims: 2..=max_cells / 2,
            k: 2..=4,
            ..CategoryTemplate::standard(category)
        };
        for spec in template.candidates() {
            if spec.board.cells().is_some_and(|n| n <= max_cells as u64) && seen.insert(spec.canonical_rules()) {
                out.push(spec);
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CorpusHeader {
    format: String,
    version: u32,
}

pub fn write_corpus(path: &Path, corpus: &[GameSpec]) -> Result<()> {
    let mut out = Vec::new();
    let header = CorpusHeader { format: CORPUS_FORMAT.into(), version: CORPUS_VERSION };
    serde_json::to_writer(&mut out, &header)?;
    out.push(b'\n');
    for spec in corpus {
        serde_json::to_writer(&mut out, spec)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<GameSpec>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<CorpusHeader>(&line) {
                if h.format != CORPUS_FORMAT || h.version > CORPUS_VERSION {
                    return Err(Error::Data(format!("{}: unsupported corpus format {} v{}", path.display(), h.format, h.version)));
                }
                continue;
            }
        }
        let spec: GameSpec = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        spec.validate().map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(spec);
    }
    let mut ids = HashSet::new();
    for spec in &out {
        if !ids.insert(spec.game_id.as_str()) {
            return Err(Error::Data(format!("{}: duplicate game_id {}", path.display(), spec.game_id)));
        }
    }
    Ok(out)
}
