//! Precomputed line windows and board symmetries for bitboard-sized boards.

use super::spec::{Board, Cell, GameSpec, LineRule, Player};

/// Boards with at most this many cells use the bitboard representation.
pub(crate) const DENSE_MAX_CELLS: u32 = 128;

#[derive(Clone, Debug)]
pub(crate) struct DenseGeometry {
    pub rows: u32,
    pub cols: u32,
    pub full: u128,
    /// All k-windows each player may complete, per player.
    pub windows: [Vec<u128>; 2],
    /// Window indices through each cell, per player.
    pub cell_windows: [Vec<Vec<u32>>; 2],
    /// Cell permutations of the board's symmetry group (identity first).
    pub symmetries: Vec<Vec<u8>>,
}

impl DenseGeometry {
    pub fn new(spec: &GameSpec) -> Option<DenseGeometry> {
        let Board::Finite { rows, cols } = spec.board else {
            return None;
        };
        if rows.checked_mul(cols)? > DENSE_MAX_CELLS {
            return None;
        }
        let n = rows * cols;
        let full = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        let mut windows: [Vec<u128>; 2] = Default::default();
        let mut cell_windows: [Vec<Vec<u32>>; 2] = [vec![Vec::new(); n as usize], vec![Vec::new(); n as usize]];
        for player in [Player::P1, Player::P2] {
            let p = player.index();
            let k = spec.k(player) as i32;
            for (mask, cells) in line_windows(rows, cols, k, spec.line_rule(player)) {
                let id = windows[p].len() as u32;
                windows[p].push(mask);
                for c in cells {
                    cell_windows[p][c].push(id);
                }
            }
        }
        let symmetries = symmetry_maps(rows, cols)
            .into_iter()
            .map(|f| {
                (0..n)
                    .map(|i| {
                        let (r, c) = f((i / cols) as i32, (i % cols) as i32);
                        (r as u32 * cols + c as u32) as u8
                    })
                    .collect()
            })
            .collect();
        Some(DenseGeometry { rows, cols, full, windows, cell_windows, symmetries })
    }

    pub fn index(&self, cell: Cell) -> Option<usize> {
        if cell.row < 0 || cell.col < 0 || cell.row as u32 >= self.rows || cell.col as u32 >= self.cols {
            return None;
        }
        Some((cell.row as u32 * self.cols + cell.col as u32) as usize)
    }

    pub fn cell(&self, idx: usize) -> Cell {
        Cell::new((idx as u32 / self.cols) as i32, (idx as u32 % self.cols) as i32)
    }

    pub fn has_line(&self, player: Player, bits: u128) -> bool {
        self.windows[player.index()].iter().any(|&w| bits & w == w)
    }

    pub fn completes_line(&self, player: Player, bits: u128, placed: impl IntoIterator<Item = usize>) -> bool {
        let p = player.index();
        placed.into_iter().any(|idx| {
            self.cell_windows[p][idx].iter().any(|&w| {
                let w = self.windows[p][w as usize];
                bits & w == w
            })
        })
    }

    pub fn transform(perm: &[u8], mut bits: u128) -> u128 {
        let mut out = 0u128;
        while bits != 0 {
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            out |= 1u128 << perm[i as usize];
        }
        out
    }
}

/// Every k-window on a finite board along the rule's directions, as a mask
/// plus its cell indices.
fn line_windows(rows: u32, cols: u32, k: i32, rule: LineRule) -> Vec<(u128, Vec<usize>)> {
    let mut out = Vec::new();
    let (rows, cols) = (rows as i32, cols as i32);
    for &(dr, dc) in rule.directions() {
        for r in 0..rows {
            for c in 0..cols {
                let (er, ec) = (r + dr * (k - 1), c + dc * (k - 1));
                if er < 0 || er >= rows || ec < 0 || ec >= cols {
                    continue;
                }
                let cells: Vec<usize> = (0..k).map(|i| ((r + dr * i) * cols + (c + dc * i)) as usize).collect();
                let mask = cells.iter().fold(0u128, |m, &i| m | 1u128 << i);
                out.push((mask, cells));
            }
        }
    }
    out
}

type CellMap = Box<dyn Fn(i32, i32) -> (i32, i32)>;

/// Coordinate maps preserving a finite board and every line rule: the
/// dihedral group of order 8 on squares, the Klein four-group on rectangles.
pub(crate) fn symmetry_maps(rows: u32, cols: u32) -> Vec<CellMap> {
    let (rr, cc) = (rows as i32 - 1, cols as i32 - 1);
    let mut maps: Vec<CellMap> = vec![
        Box::new(|r, c| (r, c)),
        Box::new(move |r, c| (rr - r, cc - c)),
        Box::new(move |r, c| (rr - r, c)),
        Box::new(move |r, c| (r, cc - c)),
    ];
    if rows == cols {
        maps.push(Box::new(|r, c| (c, r)));
        maps.push(Box::new(move |r, c| (cc - c, rr - r)));
        maps.push(Box::new(move |r, c| (c, rr - r)));
        maps.push(Box::new(move |r, c| (cc - c, r)));
    }
    maps
}
