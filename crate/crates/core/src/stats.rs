//! Nonparametric comparison of treatments: Vargha-Delaney A12, a bootstrap
//! test on the difference of means, and Scott-Knott rank grouping that uses
//! both as its split criterion.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Effects with `max(a, 1 - a)` below this are "small".
pub const SMALL_EFFECT: f64 = 0.6;

/// Probability that a value drawn from `xs` exceeds one drawn from `ys`,
/// counting ties as half.
pub fn a12(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::arg("a12 needs two non-empty samples"));
    }
    let mut wins = 0usize;
    let mut ties = 0usize;
    for x in xs {
        for y in ys {
            if x > y {
                wins += 1;
            } else if x == y {
                ties += 1;
            }
        }
    }
    Ok((wins as f64 + 0.5 * ties as f64) / (xs.len() * ys.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub confidence: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            iterations: 1000,
            confidence: 0.95,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Welch-style statistic: difference of means over its standard error.
fn t_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    let se = (var(xs, mx) / xs.len() as f64 + var(ys, my) / ys.len() as f64).sqrt();
    let diff = my - mx;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Two-sided bootstrap test that the two samples have different means.
///
/// Both samples are shifted to the pooled mean, resampled with replacement
/// `iterations` times, and the studentised mean difference of each
/// resample is compared with the observed one. Returns true when the
/// fraction at least as extreme is below `1 - confidence`.
pub fn bootstrap_different(xs: &[f64], ys: &[f64], config: BootstrapConfig, seed: u64) -> Result<bool> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::arg("bootstrap test needs at least two values per sample"));
    }
    if config.iterations == 0 || !(0.0..1.0).contains(&config.confidence) {
        return Err(Error::arg("invalid bootstrap configuration"));
    }
    let observed = t_statistic(xs, ys).abs();
    if observed == 0.0 {
        return Ok(false);
    }
    let pooled = (xs.iter().sum::<f64>() + ys.iter().sum::<f64>()) / (xs.len() + ys.len()) as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let xs0: Vec<f64> = xs.iter().map(|x| x - mx + pooled).collect();
    let ys0: Vec<f64> = ys.iter().map(|y| y - my + pooled).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rx = vec![0.0; xs.len()];
    let mut ry = vec![0.0; ys.len()];
    let mut extreme = 0usize;
    for _ in 0..config.iterations {
        for v in rx.iter_mut() {
            *v = xs0[rng.random_range(0..xs0.len())];
        }
        for v in ry.iter_mut() {
            *v = ys0[rng.random_range(0..ys0.len())];
        }
        if t_statistic(&rx, &ry).abs() >= observed {
            extreme += 1;
        }
    }
    let p = extreme as f64 / config.iterations as f64;
    Ok(p < 1.0 - config.confidence)
}

/// Linearly interpolated percentile, `q` in `[0, 1]`, of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median and interquartile range (75th minus 25th percentile).
pub fn median_iqr(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::arg("no samples"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok((percentile(&s, 0.5), percentile(&s, 0.75) - percentile(&s, 0.25)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkEntry {
    pub treatment: String,
    pub rank: usize,
    pub median: f64,
    pub iqr: f64,
    pub samples: Vec<f64>,
}

/// Treatments sorted by median with their Scott-Knott ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkRankTable(pub Vec<SkEntry>);

impl SkRankTable {
    pub fn entries(&self) -> &[SkEntry] {
        &self.0
    }

    pub fn rank_of(&self, treatment: &str) -> Option<usize> {
        self.0.iter().find(|e| e.treatment == treatment).map(|e| e.rank)
    }

    /// Plain-text quartile table: rank, treatment, median, IQR.
    pub fn render(&self) -> String {
        let width = self
            .0
            .iter()
            .map(|e| e.treatment.len())
            .max()
            .unwrap_or(0)
            .max("treatment".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:>10}  {:>10}",
            "rank", "treatment", "median", "iqr"
        );
        for e in &self.0 {
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>10.2}  {:>10.2}",
                e.rank, e.treatment, e.median, e.iqr
            );
        }
        out
    }
}

/// Scott-Knott ranking.
///
/// Treatments are sorted by median (ties by name). The sorted list is cut
/// where the between-group sum of squares of the means is largest, and the
/// two halves are ranked separately only when the bootstrap test finds them
/// different and the A12 effect is not small. Otherwise the whole group
/// shares one rank.
pub fn scott_knott(treatments: &BTreeMap<String, Vec<f64>>, config: BootstrapConfig, seed: u64) -> Result<SkRankTable> {
    if treatments.is_empty() {
        return Err(Error::arg("no treatments to rank"));
    }
    let mut entries = Vec::with_capacity(treatments.len());
    for (name, samples) in treatments {
        if samples.len() < 2 {
            return Err(Error::arg(format!("treatment {name:?} needs at least two samples")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("treatment {name:?} has non-finite samples")));
        }
        let (median, iqr) = median_iqr(samples)?;
        entries.push(SkEntry {
            treatment: name.clone(),
            rank: 0,
            median,
            iqr,
            samples: samples.clone(),
        });
    }
    entries.sort_by(|a, b| {
        a.median
            .total_cmp(&b.median)
            .then_with(|| a.treatment.cmp(&b.treatment))
    });

    let mut groups = Vec::new();
    divide(&entries, 0, entries.len(), config, seed, &mut groups)?;
    groups.sort_unstable();
    for (rank, &(start, end)) in groups.iter().enumerate() {
        for e in &mut entries[start..end] {
            e.rank = rank + 1;
        }
    }
    Ok(SkRankTable(entries))
}

fn pooled(entries: &[SkEntry]) -> Vec<f64> {
    entries.iter().flat_map(|e| e.samples.iter().copied()).collect()
}

fn divide(
    entries: &[SkEntry],
    start: usize,
    end: usize,
    config: BootstrapConfig,
    seed: u64,
    groups: &mut Vec<(usize, usize)>,
) -> Result<()> {
    if end - start < 2 {
        groups.push((start, end));
        return Ok(());
    }
    let all = pooled(&entries[start..end]);
    let grand = mean(&all);
    let mut best: Option<(f64, usize)> = None;
    for cut in start + 1..end {
        let left = pooled(&entries[start..cut]);
        let right = pooled(&entries[cut..end]);
        let between =
            left.len() as f64 * (mean(&left) - grand).powi(2) + right.len() as f64 * (mean(&right) - grand).powi(2);
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, cut));
        }
    }
    let (_, cut) = best.expect("at least one cut exists");
    let left = pooled(&entries[start..cut]);
    let right = pooled(&entries[cut..end]);
    // the test seed depends only on the group's position in the sorted order
    let test_seed = seed ^ ((start as u64) << 32 | end as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let effect = a12(&left, &right)?;
    let split = effect.max(1.0 - effect) >= SMALL_EFFECT && bootstrap_different(&left, &right, config, test_seed)?;
    if split {
        divide(entries, start, cut, config, seed, groups)?;
        divide(entries, cut, end, config, seed, groups)?;
    } else {
        groups.push((start, end));
    }
    Ok(())
}
