//! Scores for comparing an evaluator's judgments with a reference: payoff
//! combination, squared correlation, threshold accuracy, mean absolute
//! deviation, binned Wasserstein distance, split-half reliability and
//! percentile bootstrap intervals.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::game_rng;
use crate::error::{Error, Result};

fn check_pct(name: &str, v: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&v) {
        return Err(Error::Data(format!("{name} = {v} is outside [0, 100]")));
    }
    Ok(())
}

/// Player-1 payoff from an elicited win-given-no-draw percentage `q1` and
/// draw percentage `q2`.
pub fn combine_payoff(q1: f64, q2: f64) -> Result<f64> {
    check_pct("q1", q1)?;
    check_pct("q2", q2)?;
    let p_win = q1 / 100.0 * (1.0 - q2 / 100.0);
    Ok(p_win - (1.0 - (q2 / 100.0 + p_win)))
}

fn check_pairs(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Data(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value".into()));
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Squared Pearson correlation of paired per-game means.
pub fn r_squared(reference: &[f64], candidate: &[f64]) -> Result<f64> {
    check_pairs(reference, candidate)?;
    if reference.len() < 2 {
        return Err(Error::Data("r_squared needs at least two games".into()));
    }
    let (mx, my) = (mean(reference), mean(candidate));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in reference.iter().zip(candidate) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric("r_squared of a constant vector".into()));
    }
    Ok((sxy * sxy / (sxx * syy)).clamp(0.0, 1.0))
}

pub const DEFAULT_ACCURACY_THRESHOLD: f64 = 0.5;

/// Fraction of predictions strictly closer than `threshold` to the optimum.
pub fn accuracy_within(predictions: &[f64], optima: &[f64], threshold: f64) -> Result<f64> {
    check_pairs(predictions, optima)?;
    if predictions.is_empty() {
        return Err(Error::Data("accuracy of zero games".into()));
    }
    if let Some(o) = optima.iter().find(|o| ![-1.0, 0.0, 1.0].contains(*o)) {
        return Err(Error::Data(format!("optimal payoff {o} is not -1, 0 or 1")));
    }
    let hits = predictions.iter().zip(optima).filter(|(p, o)| (*p - *o).abs() < threshold).count();
    Ok(hits as f64 / predictions.len() as f64)
}

pub fn mean_abs_dev(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pairs(a, b)?;
    if a.is_empty() {
        return Err(Error::Data("deviation of zero games".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

pub const DEFAULT_BINS: usize = 20;

/// Normalised histogram over `bins` equal bins of `[lo, hi]`; `hi` falls in
/// the last bin.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Data("histogram of an empty sample".into()));
    }
    if bins < 2 || !(hi > lo) {
        return Err(Error::Config(format!("need bins >= 2 and lo < hi, got {bins} bins over [{lo}, {hi}]")));
    }
    let mut h = vec![0.0; bins];
    for &x in samples {
        if !(lo..=hi).contains(&x) {
            return Err(Error::Data(format!("sample {x} is outside [{lo}, {hi}]")));
        }
        let i = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
        h[i.min(bins - 1)] += 1.0;
    }
    let n = samples.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    Ok(h)
}

/// Earth-mover distance between the binned histograms of two samples:
/// the summed absolute CDF difference times the bin width.
pub fn wasserstein_binned(a: &[f64], b: &[f64], lo: f64, hi: f64, bins: usize) -> Result<f64> {
    let (ha, hb) = (histogram(a, lo, hi, bins)?, histogram(b, lo, hi, bins)?);
    let width = (hi - lo) / bins as f64;
    let (mut ca, mut cb, mut total) = (0.0, 0.0, 0.0);
    for (x, y) in ha.iter().zip(&hb) {
        ca += x;
        cb += y;
        total += (ca - cb).abs();
    }
    Ok(total * width)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub point: f64,
    pub high: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: u32,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { n_boot: 10_000, level: 0.95, seed: 0 }
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Percentile bootstrap. `resample` draws one replicate from an rng and the
/// interval is taken over `statistic` of the replicates. Replicates whose
/// statistic is undefined are dropped.
fn percentile_bootstrap<T: Send, S, D>(point: f64, resample: D, statistic: S, config: &BootstrapConfig) -> Result<Interval>
where
    D: Fn(&mut rand_chacha::ChaCha8Rng) -> T + Sync,
    S: Fn(&T) -> Option<f64> + Sync,
{
    if config.n_boot < 100 {
        return Err(Error::Config(format!("n_boot = {} is below the minimum of 100", config.n_boot)));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::Config(format!("confidence level {} is not in (0, 1)", config.level)));
    }
    let mut stats: Vec<f64> = (0..config.n_boot as u64)
        .into_par_iter()
        .filter_map(|b| statistic(&resample(&mut game_rng(config.seed, b))))
        .filter(|v| v.is_finite())
        .collect();
    if stats.is_empty() {
        return Err(Error::UndefinedMetric("every bootstrap replicate was undefined".into()));
    }
    if stats.len() < config.n_boot as usize {
        log::warn!("{} of {} bootstrap replicates were undefined", config.n_boot as usize - stats.len(), config.n_boot);
    }
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - config.level) / 2.0;
    Ok(Interval { low: quantile(&stats, tail), point, high: quantile(&stats, 1.0 - tail) })
}

/// Bootstrap over units: each replicate draws `units.len()` units with
/// replacement. Units are whatever the caller groups by (games,
/// participants, rollouts).
pub fn bootstrap_ci<T: Sync, S>(units: &[T], statistic: S, config: &BootstrapConfig) -> Result<Interval>
where
    S: Fn(&[&T]) -> Option<f64> + Sync,
{
    if units.is_empty() {
        return Err(Error::Data("bootstrap over zero units".into()));
    }
    let all: Vec<&T> = units.iter().collect();
    let point = statistic(&all).ok_or_else(|| Error::UndefinedMetric("statistic undefined on the full sample".into()))?;
    percentile_bootstrap(
        point,
        |rng| (0..units.len()).map(|_| &units[rng.random_range(0..units.len())]).collect::<Vec<&T>>(),
        |sample: &Vec<&T>| statistic(sample),
        config,
    )
}

/// Bootstrap that keeps every group and resamples the members inside each
/// group with replacement (for example rollouts within each game).
pub fn bootstrap_within_ci<S>(groups: &[Vec<f64>], statistic: S, config: &BootstrapConfig) -> Result<Interval>
where
    S: Fn(&[Vec<f64>]) -> Option<f64> + Sync,
{
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Data("bootstrap needs non-empty groups".into()));
    }
    let point = statistic(groups).ok_or_else(|| Error::UndefinedMetric("statistic undefined on the full sample".into()))?;
    percentile_bootstrap(
        point,
        |rng| {
            groups
                .iter()
                .map(|g| (0..g.len()).map(|_| g[rng.random_range(0..g.len())]).collect())
                .collect::<Vec<Vec<f64>>>()
        },
        |sample: &Vec<Vec<f64>>| statistic(sample),
        config,
    )
}

pub const DEFAULT_SPLITS: u32 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitHalf {
    pub value: f64,
    /// Indices of games left out for having fewer than two judgments.
    pub excluded: Vec<usize>,
    /// Splits whose correlation was undefined and so left out of the mean.
    pub undefined_splits: u32,
}

/// Mean over `n_splits` random splits of the squared correlation between
/// per-game means of two disjoint halves of each game's judgments. Odd
/// counts split `n / 2` against the rest.
pub fn split_half(judgments: &[Vec<f64>], n_splits: u32, seed: u64) -> Result<SplitHalf> {
    if n_splits == 0 {
        return Err(Error::Config("n_splits must be at least 1".into()));
    }
    let excluded: Vec<usize> = (0..judgments.len()).filter(|&i| judgments[i].len() < 2).collect();
    for &i in &excluded {
        log::warn!("split-half: game {i} has fewer than two judgments and is excluded");
    }
    let kept: Vec<&Vec<f64>> = judgments.iter().filter(|j| j.len() >= 2).collect();
    if kept.len() < 2 {
        return Err(Error::UndefinedMetric("split-half needs at least two games with two judgments".into()));
    }
    let values: Vec<Option<f64>> = (0..n_splits as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = game_rng(seed, s);
            let (mut a, mut b) = (Vec::with_capacity(kept.len()), Vec::with_capacity(kept.len()));
            for game in &kept {
                let mut shuffled = (*game).clone();
                shuffled.shuffle(&mut rng);
                let (x, y) = shuffled.split_at(shuffled.len() / 2);
                a.push(mean(x));
                b.push(mean(y));
            }
            r_squared(&a, &b).ok()
        })
        .collect();
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric("split-half correlation undefined on every split".into()));
    }
    Ok(SplitHalf { value: mean(&defined), excluded, undefined_splits: (values.len() - defined.len()) as u32 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    R2,
    Accuracy,
    MeanAbsDev,
    Wasserstein,
    SplitHalf,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::R2 => "r2",
            Metric::Accuracy => "accuracy",
            Metric::MeanAbsDev => "dev",
            Metric::Wasserstein => "wasserstein",
            Metric::SplitHalf => "splithalf",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        [Metric::R2, Metric::Accuracy, Metric::MeanAbsDev, Metric::Wasserstein, Metric::SplitHalf]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One metric value with its bootstrap interval. The interval is reported
/// exactly as the percentile method produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub comparison_id: String,
    pub metric: Metric,
    pub grouping: Option<String>,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_games: usize,
    pub parameters: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub threshold: f64,
    pub bins: usize,
    /// Judgment range for histograms: `[-1, 1]` for payoff, `[0, 100]` for funness.
    pub range: (f64, f64),
    pub n_splits: u32,
    pub bootstrap: BootstrapConfig,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            threshold: DEFAULT_ACCURACY_THRESHOLD,
            bins: DEFAULT_BINS,
            range: (-1.0, 1.0),
            n_splits: DEFAULT_SPLITS,
            bootstrap: BootstrapConfig::default(),
        }
    }
}

impl MetricParams {
    fn describe(&self, metric: Metric) -> String {
        let boot = format!("n_boot={};level={};seed={};unit=games", self.bootstrap.n_boot, self.bootstrap.level, self.bootstrap.seed);
        match metric {
            Metric::R2 => format!("r2=squared_pearson;{boot}"),
            Metric::Accuracy => format!("threshold={};strict=true;{boot}", self.threshold),
            Metric::MeanAbsDev => boot,
            Metric::Wasserstein => format!("bins={};range={}..{};{boot}", self.bins, self.range.0, self.range.1),
            Metric::SplitHalf => format!("n_splits={};r2=squared_pearson;{boot}", self.n_splits),
        }
    }
}

/// Per-game judgments, keyed by game id.
pub type Judgments = BTreeMap<String, Vec<f64>>;

/// Scores `candidate` against `reference` over the games both cover, with
/// a bootstrap over games. Split-half looks at `candidate` only.
pub fn evaluate(
    comparison_id: &str,
    metric: Metric,
    candidate: &Judgments,
    reference: &Judgments,
    params: &MetricParams,
) -> Result<EvalReport> {
    let games: Vec<(&Vec<f64>, &Vec<f64>)> = if metric == Metric::SplitHalf {
        candidate.values().filter(|v| !v.is_empty()).map(|v| (v, v)).collect()
    } else {
        candidate
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .filter_map(|(g, v)| reference.get(g).filter(|r| !r.is_empty()).map(|r| (v, r)))
            .collect()
    };
    if games.is_empty() {
        return Err(Error::Data(format!("{comparison_id}: no games in common")));
    }
    let (lo, hi, bins) = (params.range.0, params.range.1, params.bins);
    let threshold = params.threshold;
    let (n_splits, split_seed) = (params.n_splits, params.bootstrap.seed);
    let statistic = move |sample: &[&(&Vec<f64>, &Vec<f64>)]| -> Result<f64> {
        let cand: Vec<f64> = sample.iter().map(|(c, _)| mean(c)).collect();
        let refs: Vec<f64> = sample.iter().map(|(_, r)| mean(r)).collect();
        match metric {
            Metric::R2 => r_squared(&refs, &cand),
            Metric::Accuracy => accuracy_within(&cand, &refs, threshold),
            Metric::MeanAbsDev => mean_abs_dev(&cand, &refs),
            Metric::Wasserstein => {
                let mut total = 0.0;
                for (c, r) in sample {
                    total += wasserstein_binned(c, r, lo, hi, bins)?;
                }
                Ok(total / sample.len() as f64)
            }
            Metric::SplitHalf => {
                let groups: Vec<Vec<f64>> = sample.iter().map(|(c, _)| (*c).clone()).collect();
                split_half(&groups, n_splits, split_seed).map(|s| s.value)
            }
        }
    };
    let all: Vec<&(&Vec<f64>, &Vec<f64>)> = games.iter().collect();
    let value = statistic(&all)?;
    let ci = bootstrap_ci(&games, |s| statistic(s).ok(), &params.bootstrap)?;
    Ok(EvalReport {
        comparison_id: comparison_id.to_string(),
        metric,
        grouping: None,
        value,
        ci_low: ci.low,
        ci_high: ci.high,
        n_games: games.len(),
        parameters: params.describe(metric),
    })
}

/// [`evaluate`] restricted to each group of games (for example the game
/// categories). Groups where the metric is undefined are skipped with a
/// warning.
pub fn evaluate_grouped(
    comparison_id: &str,
    metric: Metric,
    candidate: &Judgments,
    reference: &Judgments,
    group_of: &BTreeMap<String, String>,
    params: &MetricParams,
) -> Vec<EvalReport> {
    let mut labels: Vec<&String> = group_of.values().collect();
    labels.sort();
    labels.dedup();
    let mut out = Vec::new();
    for label in labels {
        let pick = |m: &Judgments| -> Judgments {
            m.iter().filter(|(g, _)| group_of.get(*g) == Some(label)).map(|(g, v)| (g.clone(), v.clone())).collect()
        };
        match evaluate(comparison_id, metric, &pick(candidate), &pick(reference), params) {
            Ok(mut r) => {
                r.grouping = Some(label.clone());
                out.push(r);
            }
            Err(e) => log::warn!("{comparison_id} {metric} for {label}: {e}"),
        }
    }
    out
}

/// Writes reports as CSV with a fixed column order.
pub fn write_reports<W: Write>(writer: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Data(format!("writing report: {e}"));
    w.write_record(["comparison_id", "metric", "grouping", "value", "ci_low", "ci_high", "n_games", "parameters"]).map_err(io)?;
    for r in reports {
        w.write_record([
            r.comparison_id.clone(),
            r.metric.name().to_string(),
            r.grouping.clone().unwrap_or_default(),
            r.value.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.n_games.to_string(),
            r.parameters.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing report: {e}")))?;
    Ok(())
}
