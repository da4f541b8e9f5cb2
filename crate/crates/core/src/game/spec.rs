use std::fmt;

use serde::{Deserialize, Serialize};

use super::GameError;

/// Board cell, addressed as `(row, col)`. Finite boards use 0-based indices;
/// infinite boards use the whole signed plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Cell { row, col }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }
}

impl From<(i32, i32)> for Cell {
    fn from((row, col): (i32, i32)) -> Self {
        Cell { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    P1,
    P2,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::P1 => Player::P2,
            Player::P2 => Player::P1,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Player::P1 => 0,
            Player::P2 => 1,
        }
    }

    /// +1 for player 1, -1 for player 2.
    pub fn sign(self) -> i8 {
        match self {
            Player::P1 => 1,
            Player::P2 => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Board {
    Finite { rows: u32, cols: u32 },
    Infinite,
}

impl Board {
    pub fn square(n: u32) -> Board {
        Board::Finite { rows: n, cols: n }
    }

    pub fn cells(&self) -> Option<u64> {
        match *self {
            Board::Finite { rows, cols } => Some(rows as u64 * cols as u64),
            Board::Infinite => None,
        }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        match *self {
            Board::Finite { rows, cols } => {
                cell.row >= 0 && cell.col >= 0 && (cell.row as u32) < rows && (cell.col as u32) < cols
            }
            Board::Infinite => true,
        }
    }
}

/// Which line directions count toward a player's goal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineRule {
    #[default]
    All,
    NoDiagonal,
    OnlyDiagonal,
}

/// Unit steps for horizontal, vertical, diagonal and anti-diagonal lines.
pub(crate) const DIRECTIONS: [(i32, i32); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

impl LineRule {
    pub(crate) fn directions(self) -> &'static [(i32, i32)] {
        match self {
            LineRule::All => &DIRECTIONS,
            LineRule::NoDiagonal => &DIRECTIONS[..2],
            LineRule::OnlyDiagonal => &DIRECTIONS[2..],
        }
    }
}

/// What happens to the player who completes a line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompletionEffect {
    #[default]
    Win,
    Lose,
}

/// The eleven corpus categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "K in a Row (Square)")]
    KInARowSquare,
    #[serde(rename = "K in a Row (Rectangle)")]
    KInARowRectangle,
    #[serde(rename = "Infinite Board")]
    InfiniteBoard,
    #[serde(rename = "K in a Row Loses")]
    KInARowLoses,
    #[serde(rename = "No Diagonal Win Allowed")]
    NoDiagonalWin,
    #[serde(rename = "Only Diagonal Win Allowed")]
    OnlyDiagonalWin,
    #[serde(rename = "First Player Moves 2 pieces")]
    FirstPlayerMovesTwo,
    #[serde(rename = "Second Player Moves 2 Pieces")]
    SecondPlayerMovesTwo,
    #[serde(rename = "First Player Handicap (P1 no diag)")]
    FirstPlayerNoDiagonal,
    #[serde(rename = "First Player Handicap (P1 only diag)")]
    FirstPlayerOnlyDiagonal,
    #[serde(rename = "Second Player K-1 to Win")]
    SecondPlayerKMinusOne,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::KInARowSquare,
        Category::KInARowRectangle,
        Category::InfiniteBoard,
        Category::KInARowLoses,
        Category::NoDiagonalWin,
        Category::OnlyDiagonalWin,
        Category::FirstPlayerMovesTwo,
        Category::SecondPlayerMovesTwo,
        Category::FirstPlayerNoDiagonal,
        Category::FirstPlayerOnlyDiagonal,
        Category::SecondPlayerKMinusOne,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::KInARowSquare => "K in a Row (Square)",
            Category::KInARowRectangle => "K in a Row (Rectangle)",
            Category::InfiniteBoard => "Infinite Board",
            Category::KInARowLoses => "K in a Row Loses",
            Category::NoDiagonalWin => "No Diagonal Win Allowed",
            Category::OnlyDiagonalWin => "Only Diagonal Win Allowed",
            Category::FirstPlayerMovesTwo => "First Player Moves 2 pieces",
            Category::SecondPlayerMovesTwo => "Second Player Moves 2 Pieces",
            Category::FirstPlayerNoDiagonal => "First Player Handicap (P1 no diag)",
            Category::FirstPlayerOnlyDiagonal => "First Player Handicap (P1 only diag)",
            Category::SecondPlayerKMinusOne => "Second Player K-1 to Win",
        }
    }

    pub fn from_label(label: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.label().eq_ignore_ascii_case(label.trim()))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Complete rule description of one game variant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameSpec {
    pub board: Board,
    pub k_p1: u32,
    pub k_p2: u32,
    pub line_rule_p1: LineRule,
    pub line_rule_p2: LineRule,
    pub completion_effect: CompletionEffect,
    pub opening_placements_p1: u32,
    pub opening_placements_p2: u32,
    pub max_plies: u32,
    pub game_id: String,
    pub category: Category,
}

/// Ply cap used for infinite boards unless overridden.
pub const DEFAULT_INFINITE_MAX_PLIES: u32 = 60;

impl GameSpec {
    /// Standard k-in-a-row on a `rows x cols` board.
    pub fn k_in_a_row(rows: u32, cols: u32, k: u32) -> GameSpec {
        let category = if rows == cols {
            Category::KInARowSquare
        } else {
            Category::KInARowRectangle
        };
        GameSpec {
            board: Board::Finite { rows, cols },
            k_p1: k,
            k_p2: k,
            line_rule_p1: LineRule::All,
            line_rule_p2: LineRule::All,
            completion_effect: CompletionEffect::Win,
            opening_placements_p1: 1,
            opening_placements_p2: 1,
            max_plies: rows.saturating_mul(cols).max(1),
            game_id: format!("k{k}-{rows}x{cols}"),
            category,
        }
    }

    pub fn tic_tac_toe() -> GameSpec {
        GameSpec {
            game_id: "tic-tac-toe".into(),
            ..GameSpec::k_in_a_row(3, 3, 3)
        }
    }

    pub fn infinite(k: u32, max_plies: u32) -> GameSpec {
        GameSpec {
            board: Board::Infinite,
            max_plies,
            game_id: format!("k{k}-infinite"),
            category: Category::InfiniteBoard,
            ..GameSpec::k_in_a_row(1, 1, k)
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.game_id = id.into();
        self
    }

    pub fn with_category(mut self, category: Category) -> Self {
        self.category = category;
        self
    }

    pub fn k(&self, player: Player) -> u32 {
        match player {
            Player::P1 => self.k_p1,
            Player::P2 => self.k_p2,
        }
    }

    pub fn line_rule(&self, player: Player) -> LineRule {
        match player {
            Player::P1 => self.line_rule_p1,
            Player::P2 => self.line_rule_p2,
        }
    }

    pub fn opening_placements(&self, player: Player) -> u32 {
        match player {
            Player::P1 => self.opening_placements_p1,
            Player::P2 => self.opening_placements_p2,
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |reason: &str| Err(GameError::InvalidSpec(format!("{}: {reason}", self.game_id)));
        if let Board::Finite { rows, cols } = self.board {
            if rows == 0 || cols == 0 {
                return bad("board dimensions must be positive");
            }
            if rows > 4096 || cols > 4096 {
                return bad("board dimensions above 4096 are not supported");
            }
        }
        if self.k_p1 < 2 || self.k_p2 < 2 {
            return bad("k must be at least 2");
        }
        if self.opening_placements_p1 == 0 || self.opening_placements_p2 == 0 {
            return bad("opening placements must be at least 1");
        }
        if self.max_plies == 0 {
            return bad("max_plies must be positive");
        }
        Ok(())
    }

    /// The same game with the players' roles swapped: per-player rules move
    /// to the other side. Solving it negates the value.
    pub fn mirrored(&self) -> GameSpec {
        GameSpec {
            k_p1: self.k_p2,
            k_p2: self.k_p1,
            line_rule_p1: self.line_rule_p2,
            line_rule_p2: self.line_rule_p1,
            opening_placements_p1: self.opening_placements_p2,
            opening_placements_p2: self.opening_placements_p1,
            game_id: format!("{}-mirrored", self.game_id),
            ..self.clone()
        }
    }

    /// Number of rule traits by which this game differs from 3x3 Tic-Tac-Toe.
    pub fn novelty_traits(&self) -> u32 {
        let traits = [
            self.board != Board::square(3),
            self.k_p1 != 3 || self.k_p2 != 3,
            self.line_rule_p1 != LineRule::All || self.line_rule_p2 != LineRule::All,
            self.completion_effect == CompletionEffect::Lose,
            self.opening_placements_p1 > 1 || self.opening_placements_p2 > 1,
            self.k_p1 != self.k_p2,
        ];
        traits.iter().filter(|&&t| t).count() as u32
    }

    /// Rule identity with the id and category stripped and the board
    /// oriented rows <= cols, so transposed variants compare equal.
    pub fn canonical_rules(&self) -> CanonicalRules {
        let board = match self.board {
            Board::Finite { rows, cols } => Board::Finite { rows: rows.min(cols), cols: rows.max(cols) },
            Board::Infinite => Board::Infinite,
        };
        CanonicalRules {
            board,
            k: [self.k_p1, self.k_p2],
            line_rules: [self.line_rule_p1, self.line_rule_p2],
            completion_effect: self.completion_effect,
            openings: [self.opening_placements_p1, self.opening_placements_p2],
            max_plies: self.max_plies,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalRules {
    board: Board,
    k: [u32; 2],
    line_rules: [LineRule; 2],
    completion_effect: CompletionEffect,
    openings: [u32; 2],
    max_plies: u32,
}
