#![allow(dead_code)]

//! Second implementations of the scoring formulas, written from their
//! textbook definitions rather than from the library code.

/// P(win) − P(loss), with P(win) = q1·(1 − q2) and P(loss) the rest of the
/// non-draw mass.
pub fn payoff(q1: f64, q2: f64) -> f64 {
    let draw = q2 / 100.0;
    let win = (q1 / 100.0) * (1.0 - draw);
    let loss = 1.0 - draw - win;
    win - loss
}

/// Squared Pearson correlation from raw sums.
pub fn pearson_sq(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
    r * r
}

pub fn accuracy(pred: &[f64], opt: &[f64], threshold: f64) -> f64 {
    let mut hits = 0;
    for i in 0..pred.len() {
        let gap = if pred[i] > opt[i] { pred[i] - opt[i] } else { opt[i] - pred[i] };
        if gap < threshold {
            hits += 1;
        }
    }
    hits as f64 / pred.len() as f64
}

pub fn mad(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..a.len() {
        total += (a[i] - b[i]).abs();
    }
    total / a.len() as f64
}

fn bin_counts(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &x in xs {
        let mut b = 0;
        while b + 1 < bins && x >= lo + (b + 1) as f64 * width {
            b += 1;
        }
        counts[b] += 1.0 / xs.len() as f64;
    }
    counts
}

/// Optimal 1-D transport between the two histograms by the north-west
/// corner rule, costing |i − j| bin widths per unit of mass moved.
pub fn emd(a: &[f64], b: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let mut supply = bin_counts(a, lo, hi, bins);
    let mut demand = bin_counts(b, lo, hi, bins);
    let width = (hi - lo) / bins as f64;
    let (mut i, mut j, mut cost) = (0, 0, 0.0);
    while i < bins && j < bins {
        let moved = supply[i].min(demand[j]);
        cost += moved * (i as f64 - j as f64).abs() * width;
        supply[i] -= moved;
        demand[j] -= moved;
        if supply[i] <= 1e-15 {
            i += 1;
        } else {
            j += 1;
        }
    }
    cost
}
