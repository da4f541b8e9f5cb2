#![allow(dead_code)]

//! Reference implementations written straight from the rules, sharing no
//! code with the library's engine (no bitboards, no symmetry tables, no
//! alpha-beta). Tests compare the library against these.

use std::collections::HashSet;

use gameeval::game::{Board, CompletionEffect, GameSpec, LineRule, Outcome};

const DIRS: [(i32, i32); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

fn dirs(rule: LineRule) -> Vec<(i32, i32)> {
    DIRS.iter()
        .copied()
        .filter(|&(dr, dc)| {
            let diagonal = dr != 0 && dc != 0;
            match rule {
                LineRule::All => true,
                LineRule::NoDiagonal => !diagonal,
                LineRule::OnlyDiagonal => diagonal,
            }
        })
        .collect()
}

/// Does `player` (1 or 2) own a run of at least `k` cells along an allowed
/// direction? Plain scan over every cell and direction.
pub fn scan_has_line(cells: &[(i32, i32, u8)], player: u8, k: u32, rule: LineRule) -> bool {
    let mine: HashSet<(i32, i32)> = cells.iter().filter(|c| c.2 == player).map(|&(r, c, _)| (r, c)).collect();
    let owned = |r: i32, c: i32| mine.contains(&(r, c));
    for &(r, c, p) in cells {
        if p != player {
            continue;
        }
        for (dr, dc) in dirs(rule) {
            let mut run = 0;
            while owned(r + dr * run, c + dc * run) {
                run += 1;
            }
            if run as u32 >= k {
                return true;
            }
        }
    }
    false
}

/// Terminal status of a position reached by `last_mover` completing a move,
/// judged from scratch.
pub fn scan_outcome(spec: &GameSpec, cells: &[(i32, i32, u8)], last_mover: u8, ply: u32) -> Outcome {
    let line = |p: u8| scan_has_line(cells, p, if p == 1 { spec.k_p1 } else { spec.k_p2 }, if p == 1 { spec.line_rule_p1 } else { spec.line_rule_p2 });
    // Only the mover's pieces changed, so only the mover can have just completed a line.
    if line(last_mover) {
        let winner = match spec.completion_effect {
            CompletionEffect::Win => last_mover,
            CompletionEffect::Lose => 3 - last_mover,
        };
        return if winner == 1 { Outcome::P1Win } else { Outcome::P2Win };
    }
    let full = match spec.board {
        Board::Finite { rows, cols } => cells.len() as u64 >= rows as u64 * cols as u64,
        Board::Infinite => false,
    };
    if full || ply >= spec.max_plies {
        Outcome::Draw
    } else {
        Outcome::Ongoing
    }
}

/// Exhaustive minimax without pruning or symmetry reduction. Positions are
/// memoised by their exact board contents when `memo` is set (boards of at
/// most 16 cells); otherwise the whole game tree is walked.
pub struct ExhaustiveOracle {
    rows: i32,
    cols: i32,
    lines: [Vec<Vec<usize>>; 2],
    /// Indices into `lines[p]` of the lines through each cell.
    through: [Vec<Vec<usize>>; 2],
    effect: CompletionEffect,
    openings: [u32; 2],
    max_plies: u32,
    memo: Option<Vec<i8>>,
    pow3: Vec<u32>,
    first: usize,
}

impl ExhaustiveOracle {
    pub fn new(spec: &GameSpec, memo: bool) -> ExhaustiveOracle {
        ExhaustiveOracle::with_first_mover(spec, memo, 1)
    }

    /// As [`ExhaustiveOracle::new`], but seat `first` (1 or 2) opens the game.
    pub fn with_first_mover(spec: &GameSpec, memo: bool, first: u8) -> ExhaustiveOracle {
        let Board::Finite { rows, cols } = spec.board else { panic!("finite boards only") };
        let (rows, cols) = (rows as i32, cols as i32);
        let n = (rows * cols) as usize;
        assert!(!memo || n <= 16, "memo table sized for at most 16 cells");
        let mut lines: [Vec<Vec<usize>>; 2] = Default::default();
        for p in 0..2 {
            let k = if p == 0 { spec.k_p1 } else { spec.k_p2 } as i32;
            let rule = if p == 0 { spec.line_rule_p1 } else { spec.line_rule_p2 };
            for r in 0..rows {
                for c in 0..cols {
                    for (dr, dc) in dirs(rule) {
                        let cells: Vec<_> = (0..k).map(|i| (r + dr * i, c + dc * i)).collect();
                        if cells.iter().all(|&(rr, cc)| rr >= 0 && rr < rows && cc >= 0 && cc < cols) {
                            lines[p].push(cells.iter().map(|&(rr, cc)| (rr * cols + cc) as usize).collect());
                        }
                    }
                }
            }
        }
        let pow3 = (0..=n).map(|i| 3u32.pow(i as u32)).collect();
        let mut through: [Vec<Vec<usize>>; 2] = [vec![Vec::new(); n], vec![Vec::new(); n]];
        for (p, per_player) in lines.iter().enumerate() {
            for (li, line) in per_player.iter().enumerate() {
                for &cell in line {
                    through[p][cell].push(li);
                }
            }
        }
        ExhaustiveOracle {
            rows,
            cols,
            lines,
            through,
            effect: spec.completion_effect,
            openings: [spec.opening_placements_p1, spec.opening_placements_p2],
            max_plies: spec.max_plies,
            memo: memo.then(|| vec![2i8; 3usize.pow(n as u32)]),
            pow3,
            first: first as usize - 1,
        }
    }

    /// Seat-1 value of the empty board under perfect play.
    pub fn value(&mut self) -> i8 {
        let n = (self.rows * self.cols) as usize;
        let mut board = vec![0u8; n];
        self.solve(&mut board, 0, [0, 0], 0)
    }

    /// Did placing `cells` complete a line for `p`? Only lines through a
    /// new piece can have changed.
    fn completes_line(&self, board: &[u8], p: usize, cells: &[usize]) -> bool {
        cells.iter().any(|&c| self.through[p][c].iter().any(|&li| self.lines[p][li].iter().all(|&i| board[i] == p as u8 + 1)))
    }

    fn solve(&mut self, board: &mut Vec<u8>, code: usize, pieces: [u32; 2], ply: u32) -> i8 {
        if let Some(memo) = &self.memo {
            if memo[code] != 2 {
                return memo[code];
            }
        }
        let turns = |p: usize| if pieces[p] == 0 { 0 } else { 1 + pieces[p].saturating_sub(self.openings[p]) };
        let (a, b) = (self.first, 1 - self.first);
        let mover = if turns(a) == turns(b) { a } else { b };
        let want = if pieces[mover] == 0 { self.openings[mover] } else { 1 } as usize;
        let mut best: Option<i8> = None;
        let mut fold = |v: i8| {
            best = Some(match best {
                None => v,
                Some(b) if mover == 0 => b.max(v),
                Some(b) => b.min(v),
            })
        };
        if want == 1 {
            for i in 0..board.len() {
                if board[i] == 0 {
                    fold(self.play(board, code, pieces, ply, mover, &[i]));
                }
            }
        } else {
            let empty: Vec<usize> = (0..board.len()).filter(|&i| board[i] == 0).collect();
            let mut moves = Vec::new();
            subsets(&empty, want.min(empty.len()), 0, &mut Vec::new(), &mut moves);
            for cells in moves {
                fold(self.play(board, code, pieces, ply, mover, &cells));
            }
        }
        let v = best.expect("non-terminal positions have moves");
        if let Some(memo) = &mut self.memo {
            memo[code] = v;
        }
        v
    }

    fn play(&mut self, board: &mut Vec<u8>, code: usize, pieces: [u32; 2], ply: u32, mover: usize, cells: &[usize]) -> i8 {
        let mut code2 = code;
        for &i in cells {
            board[i] = mover as u8 + 1;
            code2 += (mover + 1) * self.pow3[i] as usize;
        }
        let mut pieces2 = pieces;
        pieces2[mover] += cells.len() as u32;
        let v = if self.completes_line(board, mover, cells) {
            let mover_wins = self.effect == CompletionEffect::Win;
            if (mover == 0) == mover_wins {
                1
            } else {
                -1
            }
        } else if pieces2[0] + pieces2[1] == board.len() as u32 || ply + 1 >= self.max_plies {
            0
        } else {
            self.solve(board, code2, pieces2, ply + 1)
        };
        for &i in cells {
            board[i] = 0;
        }
        v
    }
}

/// Every `want`-element subset of `items`, in lexicographic order.
fn subsets(items: &[usize], want: usize, start: usize, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if chosen.len() == want {
        out.push(chosen.clone());
        return;
    }
    for i in start..items.len() {
        chosen.push(items[i]);
        subsets(items, want, i + 1, chosen, out);
        chosen.pop();
    }
}
