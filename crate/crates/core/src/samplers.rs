//! Iterative sampling strategies.
//!
//! All three strategies share one loop: draw configurations from the
//! training pool, look up their performance, retrain a regression tree on
//! everything measured so far and score it on the testing pool. They differ
//! in the score and in when they stop:
//!
//! * progressive: accuracy `100 - MMRE`; a life is lost whenever accuracy
//!   fails to strictly improve, and sampling stops when lives run out.
//! * projective: samples until every binary feature has been seen both
//!   selected and deselected `thresh_freq` times, fits a learning curve to
//!   the accuracy observations and then samples up to the projected
//!   convergence point.
//! * rank-based: mean rank difference on the testing pool; a life is lost
//!   whenever it fails to strictly decrease.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cart::{RegressionTree, TreeParams};
use crate::curvefit::{best_fit, ConvergenceRule, CurvePoint, LearningCurveFit};
use crate::dataset::{ConfigurationTable, FeatureVector, PoolSplit};
use crate::error::{Error, Result};
use crate::metrics::{
    correlation, mean_rank_difference, mmre, AccuracyTrace, CorrelationKind, MeasureKind, TracePoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Progressive,
    Projective,
    RankBased,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Progressive, Approach::Projective, Approach::RankBased];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Progressive => "progressive",
            Approach::Projective => "projective",
            Approach::RankBased => "rank_based",
        }
    }

    /// Accepts `rank-based` and `rank_based` spellings.
    pub fn parse(s: &str) -> Option<Approach> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "progressive" => Some(Approach::Progressive),
            "projective" => Some(Approach::Projective),
            "rank_based" | "rank" => Some(Approach::RankBased),
            _ => None,
        }
    }

    pub fn run(
        self,
        split: &PoolSplit,
        table: &ConfigurationTable,
        params: &SamplerParams,
        seed: u64,
    ) -> Result<SamplerOutcome> {
        match self {
            Approach::Progressive => progressive_sample(split, table, params, seed),
            Approach::Projective => projective_sample(split, table, params, seed),
            Approach::RankBased => rank_based_sample(split, table, params, seed),
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub lives: usize,
    pub thresh_freq: usize,
    /// Configurations added per iteration.
    pub batch_size: usize,
    pub with_replacement: bool,
    /// Restore all lives after an improving iteration.
    pub reset_lives: bool,
    /// Flatness threshold for projective sampling, in accuracy points.
    pub convergence_epsilon: f64,
    pub tree: TreeParams,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            lives: 3,
            thresh_freq: 3,
            batch_size: 1,
            with_replacement: false,
            reset_lives: false,
            convergence_epsilon: 0.1,
            tree: TreeParams::default(),
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.lives < 1 {
            return Err(Error::arg("lives must be at least 1"));
        }
        if self.thresh_freq < 1 {
            return Err(Error::arg("thresh_freq must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon <= 0.0 {
            return Err(Error::arg("convergence epsilon must be positive"));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LivesExhausted,
    PoolExhausted,
    FrequencyThreshold,
    ProjectedBudgetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerOutcome {
    pub model: RegressionTree,
    /// Training-pool rows in the order they were measured.
    pub measured_indices: Vec<usize>,
    pub measurement_count: usize,
    pub trace: AccuracyTrace,
    /// Spearman correlation between predicted and actual performance on the
    /// testing pool after each retraining; `None` where it is undefined
    /// (constant predictions).
    pub correlation_trace: Vec<Option<f64>>,
    pub termination: Termination,
    /// Learning curve fitted by projective sampling, when one was fitted.
    pub curve_fit: Option<LearningCurveFit>,
}

/// Selected/deselected counts of each binary feature among measured rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub selected: Vec<usize>,
    pub deselected: Vec<usize>,
}

impl FrequencyTable {
    pub fn new(n_features: usize) -> Self {
        FrequencyTable {
            selected: vec![0; n_features],
            deselected: vec![0; n_features],
        }
    }

    pub fn record(&mut self, x: &FeatureVector) {
        for (f, v) in x.values().iter().enumerate() {
            if *v == 1.0 {
                self.selected[f] += 1;
            } else {
                self.deselected[f] += 1;
            }
        }
    }

    /// Smallest count over every feature and both values.
    pub fn min(&self) -> usize {
        self.selected.iter().chain(&self.deselected).copied().min().unwrap_or(0)
    }
}

/// Measured rows plus the draw order over the training pool.
struct Session<'a> {
    table: &'a ConfigurationTable,
    split: &'a PoolSplit,
    params: &'a SamplerParams,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    measured: Vec<usize>,
    features: Vec<FeatureVector>,
    targets: Vec<f64>,
    test_x: Vec<FeatureVector>,
    test_y: Vec<f64>,
    trace: AccuracyTrace,
    correlations: Vec<Option<f64>>,
}

impl<'a> Session<'a> {
    fn new(split: &'a PoolSplit, table: &'a ConfigurationTable, params: &'a SamplerParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if split.training_pool.is_empty() {
            return Err(Error::arg("training pool is empty"));
        }
        if split.testing_pool.is_empty() {
            return Err(Error::arg("testing pool is empty"));
        }
        let n = table.len();
        let pools = [&split.training_pool, &split.testing_pool, &split.validation_pool];
        if let Some(bad) = pools.iter().flat_map(|p| p.iter()).find(|&&i| i >= n) {
            return Err(Error::arg(format!("pool index {bad} outside table of {n} rows")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = split.training_pool.clone();
        order.shuffle(&mut rng);
        Ok(Session {
            table,
            split,
            params,
            order,
            cursor: 0,
            rng,
            measured: Vec::new(),
            features: Vec::new(),
            targets: Vec::new(),
            test_x: split.testing_pool.iter().map(|&i| table.row(i).clone()).collect(),
            test_y: split.testing_pool.iter().map(|&i| table.measure(i)).collect(),
            trace: AccuracyTrace::new(),
            correlations: Vec::new(),
        })
    }

    fn pool_size(&self) -> usize {
        self.split.training_pool.len()
    }

    /// Measures up to `k` more configurations; returns how many were added.
    fn draw(&mut self, k: usize) -> usize {
        let mut added = 0;
        while added < k {
            let idx = if self.params.with_replacement {
                // drawing with replacement never empties the pool, so the
                // number of draws is bounded by the pool size instead
                if self.measured.len() >= self.pool_size() {
                    break;
                }
                self.order[self.rng.random_range(0..self.order.len())]
            } else {
                if self.cursor >= self.order.len() {
                    break;
                }
                self.cursor += 1;
                self.order[self.cursor - 1]
            };
            self.measured.push(idx);
            self.features.push(self.table.row(idx).clone());
            self.targets.push(self.table.measure(idx));
            added += 1;
        }
        added
    }

    /// Retrains on everything measured, returning the model and its
    /// predictions on the testing pool.
    fn retrain(&mut self) -> Result<(RegressionTree, Vec<f64>)> {
        let model = RegressionTree::train(&self.features, &self.targets, self.params.tree)?;
        let predicted = model.predict_many(&self.test_x)?;
        self.correlations
            .push(correlation(&predicted, &self.test_y, CorrelationKind::Spearman).ok());
        Ok((model, predicted))
    }

    fn record(&mut self, score: f64, kind: MeasureKind) -> Result<()> {
        self.trace.push(TracePoint {
            training_size: self.measured.len(),
            score,
            measure_kind: kind,
        })
    }

    fn finish(
        self,
        model: RegressionTree,
        termination: Termination,
        curve_fit: Option<LearningCurveFit>,
    ) -> SamplerOutcome {
        SamplerOutcome {
            model,
            measurement_count: self.measured.len(),
            measured_indices: self.measured,
            trace: self.trace,
            correlation_trace: self.correlations,
            termination,
            curve_fit,
        }
    }
}

/// Shared loop of progressive and rank-based sampling. `score` maps test
/// predictions to a value where larger is better.
fn lives_loop(
    split: &PoolSplit,
    table: &ConfigurationTable,
    params: &SamplerParams,
    seed: u64,
    kind: MeasureKind,
    score: impl Fn(&[f64], &[f64]) -> Result<f64>,
    higher_is_better: bool,
) -> Result<SamplerOutcome> {
    let mut session = Session::new(split, table, params, seed)?;
    let mut lives = params.lives;
    let mut last: Option<f64> = None;
    let mut model = None;
    let termination = loop {
        if session.draw(params.batch_size) == 0 {
            break Termination::PoolExhausted;
        }
        let (m, predicted) = session.retrain()?;
        model = Some(m);
        let s = score(&predicted, &session.test_y)?;
        session.record(s, kind)?;
        let improved = match last {
            None => true,
            Some(prev) if higher_is_better => s > prev,
            Some(prev) => s < prev,
        };
        if !improved {
            lives -= 1;
        } else if params.reset_lives {
            lives = params.lives;
        }
        last = Some(s);
        if lives == 0 {
            break Termination::LivesExhausted;
        }
    };
    let model = model.expect("the training pool is non-empty, so at least one model was trained");
    Ok(session.finish(model, termination, None))
}

/// Progressive sampling scored by MMRE on the testing pool.
///
/// The trace records MMRE; a life is lost whenever accuracy (`100 - MMRE`)
/// fails to strictly improve.
pub fn progressive_sample(
    split: &PoolSplit,
    table: &ConfigurationTable,
    params: &SamplerParams,
    seed: u64,
) -> Result<SamplerOutcome> {
    lives_loop(split, table, params, seed, MeasureKind::Mmre, mmre, false)
}

/// Rank-based sampling scored by mean rank difference on the testing pool.
pub fn rank_based_sample(
    split: &PoolSplit,
    table: &ConfigurationTable,
    params: &SamplerParams,
    seed: u64,
) -> Result<SamplerOutcome> {
    lives_loop(
        split,
        table,
        params,
        seed,
        MeasureKind::MeanRankDifference,
        mean_rank_difference,
        false,
    )
}

/// Accuracy fed to learning-curve fitting.
pub fn accuracy_from_mmre(mmre: f64) -> f64 {
    (100.0 - mmre).max(0.0)
}

/// Projective sampling.
///
/// Requires every feature to be binary. If fewer than three observations
/// were collected, or no curve family fits them, no projection is made and
/// sampling stops at the frequency threshold.
pub fn projective_sample(
    split: &PoolSplit,
    table: &ConfigurationTable,
    params: &SamplerParams,
    seed: u64,
) -> Result<SamplerOutcome> {
    if let Some(f) = (0..table.n_features()).find(|&f| !table.is_binary_feature(f)) {
        return Err(Error::UnsupportedFeature {
            feature: table.feature_names()[f].clone(),
            reason: "projective sampling needs binary features; use progressive or rank-based sampling".into(),
        });
    }
    let mut session = Session::new(split, table, params, seed)?;
    let mut freq = FrequencyTable::new(table.n_features());
    let mut collector: Vec<CurvePoint> = Vec::new();
    let mut model = None;

    let reached = loop {
        let before = session.measured.len();
        if session.draw(params.batch_size) == 0 {
            break false;
        }
        for &idx in &session.measured[before..] {
            freq.record(table.row(idx));
        }
        let (m, predicted) = session.retrain()?;
        model = Some(m);
        let error = mmre(&predicted, &session.test_y)?;
        session.record(error, MeasureKind::Mmre)?;
        collector.push(CurvePoint::new(session.measured.len(), accuracy_from_mmre(error)));
        if freq.min() >= params.thresh_freq {
            break true;
        }
    };
    let model = model.expect("the training pool is non-empty, so at least one model was trained");
    if !reached {
        return Ok(session.finish(model, Termination::PoolExhausted, None));
    }

    let rule = ConvergenceRule {
        epsilon: params.convergence_epsilon,
        cap: session.pool_size(),
    };
    let fit = best_fit(&collector, rule).ok();
    let current = session.measured.len();
    let budget = fit.map_or(current, |f| f.projected_convergence);
    if budget <= current {
        return Ok(session.finish(model, Termination::FrequencyThreshold, fit));
    }
    session.draw(budget - current);
    let (model, predicted) = session.retrain()?;
    let error = mmre(&predicted, &session.test_y)?;
    session.record(error, MeasureKind::Mmre)?;
    Ok(session.finish(model, Termination::ProjectedBudgetReached, fit))
}

/// Validation row with the smallest predicted performance; ties go to the
/// lowest row index.
pub fn predict_optimum(model: &RegressionTree, validation: &[usize], table: &ConfigurationTable) -> Result<usize> {
    if validation.is_empty() {
        return Err(Error::arg("validation pool is empty"));
    }
    let mut best: Option<(f64, usize)> = None;
    for &idx in validation {
        if idx >= table.len() {
            return Err(Error::arg(format!("validation index {idx} outside table")));
        }
        let p = model.predict(table.row(idx))?;
        let better = match best {
            None => true,
            Some((bp, bi)) => p < bp || (p == bp && idx < bi),
        };
        if better {
            best = Some((p, idx));
        }
    }
    Ok(best.map(|(_, i)| i).expect("validation is non-empty"))
}

/// Recomputes the score an approach would record after training on
/// `prefix`, for auditing traces.
pub fn replay_score(
    approach: Approach,
    split: &PoolSplit,
    table: &ConfigurationTable,
    params: &SamplerParams,
    prefix: &[usize],
) -> Result<f64> {
    let xs: Vec<FeatureVector> = prefix.iter().map(|&i| table.row(i).clone()).collect();
    let ys: Vec<f64> = prefix.iter().map(|&i| table.measure(i)).collect();
    let model = RegressionTree::train(&xs, &ys, params.tree)?;
    let test_x: Vec<&FeatureVector> = split.testing_pool.iter().map(|&i| table.row(i)).collect();
    let test_y: Vec<f64> = split.testing_pool.iter().map(|&i| table.measure(i)).collect();
    let predicted = model.predict_many(test_x)?;
    match approach {
        Approach::RankBased => mean_rank_difference(&predicted, &test_y),
        Approach::Progressive | Approach::Projective => mmre(&predicted, &test_y),
    }
}
