//! Accuracy and ranking measures.
//!
//! MMRE is reported in percent. Rank-based measures use positional
//! tie-breaking (the earlier element gets the smaller rank), matching
//! [`crate::dataset::true_ranks`]; Spearman correlation instead uses average
//! ranks for ties, the usual statistical convention.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Mmre,
    MeanRankDifference,
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub training_size: usize,
    pub score: f64,
    pub measure_kind: MeasureKind,
}

/// Scores recorded after each retraining, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccuracyTrace(Vec<TracePoint>);

impl AccuracyTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a point. Training sizes must strictly increase.
    pub fn push(&mut self, point: TracePoint) -> Result<()> {
        if let Some(last) = self.0.last() {
            if point.training_size <= last.training_size {
                return Err(Error::arg(format!(
                    "trace training size {} does not follow {}",
                    point.training_size, last.training_size
                )));
            }
        }
        self.0.push(point);
        Ok(())
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|p| p.score)
    }
}

fn check_lengths(predicted: &[f64], actual: &[f64]) -> Result<()> {
    if predicted.len() != actual.len() {
        return Err(Error::arg(format!(
            "{} predictions but {} actual values",
            predicted.len(),
            actual.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::arg("empty input"));
    }
    Ok(())
}

/// Mean magnitude of relative error, in percent.
pub fn mmre(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(predicted, actual)?;
    let mut total = 0.0;
    for (i, (p, a)) in predicted.iter().zip(actual).enumerate() {
        if *a == 0.0 {
            return Err(Error::DivisionDomain(format!("actual value {i} is zero")));
        }
        total += (p - a).abs() / a.abs() * 100.0;
    }
    Ok(total / actual.len() as f64)
}

/// Ascending 1-based ranks; equal values are ranked by position.
pub fn positional_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (rank, i) in order.into_iter().enumerate() {
        ranks[i] = rank + 1;
    }
    ranks
}

/// Ascending 1-based ranks with tied values sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Mean absolute difference between the ranks of `actual` and the ranks of
/// `predicted`.
pub fn mean_rank_difference(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(predicted, actual)?;
    let rp = positional_ranks(predicted);
    let ra = positional_ranks(actual);
    let total: usize = rp.iter().zip(&ra).map(|(p, a)| p.abs_diff(*a)).sum();
    Ok(total as f64 / actual.len() as f64)
}

/// How far down the true ranking the predicted optimum sits: zero when the
/// predicted optimum is the true one.
pub fn rank_difference_of_optimum(actual_ranks: &BTreeMap<usize, usize>, predicted_best: usize) -> Result<usize> {
    actual_ranks
        .get(&predicted_best)
        .map(|r| r.abs_diff(1))
        .ok_or_else(|| Error::arg(format!("row {predicted_best} is not in the ranked set")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    Spearman,
    Pearson,
}

pub fn correlation(predicted: &[f64], actual: &[f64], kind: CorrelationKind) -> Result<f64> {
    check_lengths(predicted, actual)?;
    if actual.len() < 2 {
        return Err(Error::arg("correlation needs at least two points"));
    }
    match kind {
        CorrelationKind::Pearson => pearson(predicted, actual),
        CorrelationKind::Spearman => pearson(&average_ranks(predicted), &average_ranks(actual)),
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mmre_values() {
        assert_eq!(mmre(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mmre(&[110.0], &[100.0]).unwrap(), 10.0);
        assert_eq!(mmre(&[110.0, 90.0], &[100.0, 100.0]).unwrap(), 10.0);
    }

    #[test]
    fn mmre_errors() {
        assert!(matches!(mmre(&[1.0], &[0.0]), Err(Error::DivisionDomain(_))));
        assert!(matches!(mmre(&[1.0, 2.0], &[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn rank_difference_values() {
        assert_eq!(mean_rank_difference(&[1.0, 5.0, 9.0], &[2.0, 3.0, 4.0]).unwrap(), 0.0);
        let v = mean_rank_difference(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v, 4.0 / 3.0);
        assert_eq!(mean_rank_difference(&[8.0], &[1.0]).unwrap(), 0.0);
        assert!(mean_rank_difference(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn positional_tie_break() {
        assert_eq!(positional_ranks(&[2.0, 1.0, 1.0]), [3, 1, 2]);
        assert_eq!(average_ranks(&[2.0, 1.0, 1.0]), [3.0, 1.5, 1.5]);
    }

    #[test]
    fn optimum_rank_difference() {
        let ranks: BTreeMap<usize, usize> = [(4, 1), (7, 2), (9, 10)].into_iter().collect();
        assert_eq!(rank_difference_of_optimum(&ranks, 4).unwrap(), 0);
        assert_eq!(rank_difference_of_optimum(&ranks, 9).unwrap(), 9);
        assert_eq!(rank_difference_of_optimum(&ranks, 7).unwrap(), 1);
        assert!(rank_difference_of_optimum(&ranks, 5).is_err());
    }

    #[test]
    fn correlation_values() {
        let a = [1.0, 2.0, 3.0, 7.0];
        assert_eq!(correlation(&a, &a, CorrelationKind::Pearson).unwrap(), 1.0);
        assert_eq!(correlation(&a, &a, CorrelationKind::Spearman).unwrap(), 1.0);
        let rev = [7.0, 3.0, 2.0, 1.0];
        assert_eq!(correlation(&rev, &a, CorrelationKind::Spearman).unwrap(), -1.0);
        let s = correlation(&[10.0, 30.0, 20.0], &[1.0, 2.0, 3.0], CorrelationKind::Spearman).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert!(matches!(
            correlation(&[1.0, 1.0], &[1.0, 2.0], CorrelationKind::Pearson),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(correlation(&[1.0], &[1.0], CorrelationKind::Pearson).is_err());
    }

    #[test]
    fn trace_requires_increasing_sizes() {
        let mut t = AccuracyTrace::new();
        let p = |n| TracePoint {
            training_size: n,
            score: 0.0,
            measure_kind: MeasureKind::Mmre,
        };
        t.push(p(1)).unwrap();
        t.push(p(3)).unwrap();
        assert!(t.push(p(3)).is_err());
        assert_eq!(t.len(), 2);
    }
}
