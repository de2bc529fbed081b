//! Synthetic configurable systems with known performance-influence models.
//!
//! Performance is `offset + Σ w_i x_i + Σ w_ij x_i x_j + Σ w_ijk x_i x_j x_k`
//! plus Gaussian noise. Binary options come first in the feature order, followed by
//! numeric options with values `0..levels`. Small spaces are enumerated
//! exhaustively; larger ones are sampled uniformly without duplicates.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ConfigurationTable, FeatureVector};
use crate::error::{Error, Result};

/// Explicit linear + interaction weights over the feature order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InfluenceModel {
    pub linear: Vec<f64>,
    pub pairwise: Vec<(usize, usize, f64)>,
    /// Multiplicative three-way terms.
    pub hard: Vec<(usize, usize, usize, f64)>,
}

impl InfluenceModel {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let linear: f64 = self.linear.iter().zip(x).map(|(w, v)| w * v).sum();
        let pairwise: f64 = self.pairwise.iter().map(|&(i, j, w)| w * x[i] * x[j]).sum();
        let hard: f64 = self.hard.iter().map(|&(i, j, k, w)| w * x[i] * x[j] * x[k]).sum();
        linear + pairwise + hard
    }

    fn check(&self, n_features: usize) -> Result<()> {
        if self.linear.len() != n_features {
            return Err(Error::arg(format!(
                "influence model has {} linear weights for {n_features} features",
                self.linear.len()
            )));
        }
        let in_range = |i: usize| i < n_features;
        if !self.pairwise.iter().all(|&(i, j, _)| in_range(i) && in_range(j))
            || !self
                .hard
                .iter()
                .all(|&(i, j, k, _)| in_range(i) && in_range(j) && in_range(k))
        {
            return Err(Error::arg("interaction term refers to a missing feature"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interactions {
    None,
    /// About one pair in five interacts.
    Sparse,
    /// Every pair interacts.
    Dense,
}

impl Interactions {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(Interactions::None),
            "sparse" => Some(Interactions::Sparse),
            "dense" => Some(Interactions::Dense),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Explicit(InfluenceModel),
    /// Weights drawn from the seeded generator.
    Random {
        interactions: Interactions,
        /// Number of three-way multiplicative terms.
        hard_terms: usize,
        /// Scale of pairwise weights relative to linear ones.
        interaction_scale: f64,
        /// Scale of three-way weights relative to linear ones.
        hard_scale: f64,
        /// The `k`-th most important linear weight is scaled by
        /// `main_decay^k`; 1 keeps all options equally influential.
        main_decay: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub n_binary: usize,
    pub n_numeric: usize,
    /// Domain size of each numeric option.
    pub numeric_levels: usize,
    pub model: ModelSpec,
    /// Noise standard deviation as a fraction of the noise-free
    /// performance's standard deviation.
    pub noise: f64,
    pub offset: f64,
    /// Largest table that is enumerated exhaustively; larger spaces are
    /// sampled down to this many rows.
    pub cap: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            name: "synthetic".into(),
            n_binary: 8,
            n_numeric: 0,
            numeric_levels: 3,
            model: ModelSpec::Random {
                interactions: Interactions::Sparse,
                hard_terms: 0,
                interaction_scale: 0.5,
                hard_scale: 1.0,
                main_decay: 1.0,
            },
            noise: 0.0,
            offset: 100.0,
            cap: 10_000,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Zero-noise linear system whose weights fall off geometrically, each
    /// outweighing all smaller ones combined.
    pub fn easy(n_binary: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let linear = (0..n_binary)
            .map(|i| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * 20.0 * 0.45f64.powi(i as i32)
            })
            .collect();
        SynthSpec {
            name: format!("easy-{seed}"),
            n_binary,
            model: ModelSpec::Explicit(InfluenceModel {
                linear,
                ..InfluenceModel::default()
            }),
            offset: 100.0,
            seed,
            ..SynthSpec::default()
        }
    }

    /// Hard-to-model system: dense pairwise interactions, multiplicative
    /// three-way terms and noise, with a small offset so relative errors
    /// are large.
    pub fn hard(n_binary: usize, seed: u64) -> Self {
        SynthSpec {
            name: format!("hard-{seed}"),
            n_binary,
            model: ModelSpec::Random {
                interactions: Interactions::Dense,
                hard_terms: n_binary,
                interaction_scale: 0.35,
                hard_scale: 0.3,
                main_decay: 0.5,
            },
            noise: 0.02,
            offset: 1.0,
            seed,
            ..SynthSpec::default()
        }
    }

    fn n_features(&self) -> usize {
        self.n_binary + self.n_numeric
    }

    fn validate(&self) -> Result<()> {
        if self.n_features() == 0 {
            return Err(Error::arg("need at least one feature"));
        }
        if self.n_numeric > 0 && self.numeric_levels < 2 {
            return Err(Error::arg("numeric options need at least two levels"));
        }
        if self.cap == 0 {
            return Err(Error::arg("cap must be at least 1"));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::arg("noise must be a finite non-negative number"));
        }
        if let ModelSpec::Random { main_decay, .. } = self.model {
            if !main_decay.is_finite() || main_decay <= 0.0 {
                return Err(Error::arg("main-effect decay must be positive"));
            }
        }
        if !self.offset.is_finite() {
            return Err(Error::arg("offset must be finite"));
        }
        Ok(())
    }
}

/// A generated table together with the model that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSystem {
    pub table: ConfigurationTable,
    pub model: InfluenceModel,
    /// Constant added to `model.eval` (before noise) for every row.
    pub offset: f64,
}

fn random_model(
    n_features: usize,
    interactions: Interactions,
    hard_terms: usize,
    interaction_scale: f64,
    hard_scale: f64,
    main_decay: f64,
    rng: &mut ChaCha8Rng,
) -> InfluenceModel {
    let unit = Normal::new(0.0, 10.0).expect("valid normal");
    // importance order is independent of column order
    let mut importance: Vec<usize> = (0..n_features).collect();
    importance.shuffle(rng);
    let linear = importance
        .iter()
        .map(|&k| unit.sample(rng) * main_decay.powi(k as i32))
        .collect();
    let mut pairwise = Vec::new();
    for i in 0..n_features {
        for j in i + 1..n_features {
            let include = match interactions {
                Interactions::None => false,
                Interactions::Sparse => rng.random_bool(0.2),
                Interactions::Dense => true,
            };
            if include {
                pairwise.push((i, j, interaction_scale * unit.sample(rng)));
            }
        }
    }
    let mut hard = Vec::new();
    if n_features >= 3 {
        let mut features: Vec<usize> = (0..n_features).collect();
        for _ in 0..hard_terms {
            features.shuffle(rng);
            let mut t = [features[0], features[1], features[2]];
            t.sort_unstable();
            // three-way terms only ever add cost, which keeps rank structure
            let w = hard_scale * unit.sample(rng).abs();
            hard.push((t[0], t[1], t[2], w));
        }
    }
    InfluenceModel { linear, pairwise, hard }
}

fn enumerate(spec: &SynthSpec) -> Vec<Vec<f64>> {
    let mut rows = vec![Vec::with_capacity(spec.n_features())];
    for f in 0..spec.n_features() {
        let levels = if f < spec.n_binary { 2 } else { spec.numeric_levels };
        rows = rows
            .into_iter()
            .flat_map(|r| {
                (0..levels).map(move |v| {
                    let mut r = r.clone();
                    r.push(v as f64);
                    r
                })
            })
            .collect();
    }
    rows
}

fn space_size(spec: &SynthSpec) -> Option<usize> {
    let mut size: usize = 1;
    for f in 0..spec.n_features() {
        let levels = if f < spec.n_binary { 2 } else { spec.numeric_levels };
        size = size.checked_mul(levels)?;
    }
    Some(size)
}

fn sample_rows(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let mut seen = HashSet::with_capacity(spec.cap);
    let mut rows = Vec::with_capacity(spec.cap);
    let max_attempts = spec.cap.saturating_mul(100).max(1000);
    let mut attempts = 0;
    while rows.len() < spec.cap {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Generation(format!(
                "could not draw {} distinct configurations after {max_attempts} attempts",
                spec.cap
            )));
        }
        let row: Vec<u32> = (0..spec.n_features())
            .map(|f| {
                let levels = if f < spec.n_binary { 2 } else { spec.numeric_levels };
                rng.random_range(0..levels as u32)
            })
            .collect();
        if seen.insert(row.clone()) {
            rows.push(row.into_iter().map(f64::from).collect());
        }
    }
    Ok(rows)
}

/// Generates the system described by `spec`.
pub fn generate_system(spec: &SynthSpec) -> Result<SyntheticSystem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let model = match &spec.model {
        ModelSpec::Explicit(m) => m.clone(),
        ModelSpec::Random {
            interactions,
            hard_terms,
            interaction_scale,
            hard_scale,
            main_decay,
        } => random_model(
            spec.n_features(),
            *interactions,
            *hard_terms,
            *interaction_scale,
            *hard_scale,
            *main_decay,
            &mut rng,
        ),
    };
    model.check(spec.n_features())?;

    let rows = match space_size(spec) {
        Some(size) if size <= spec.cap => enumerate(spec),
        _ => sample_rows(spec, &mut rng)?,
    };
    let clean: Vec<f64> = rows.iter().map(|r| model.eval(r)).collect();
    let mut perf: Vec<f64> = clean.iter().map(|v| v + spec.offset).collect();
    if spec.noise > 0.0 && clean.len() > 1 {
        let m = clean.iter().sum::<f64>() / clean.len() as f64;
        let sd = (clean.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / clean.len() as f64).sqrt();
        if sd > 0.0 {
            let noise = Normal::new(0.0, spec.noise * sd).expect("valid normal");
            for p in &mut perf {
                *p += noise.sample(&mut rng);
            }
        }
    }
    let min = perf.iter().copied().fold(f64::INFINITY, f64::min);
    let mut offset = spec.offset;
    if min <= 0.0 {
        // keep every value strictly positive so relative errors are defined
        let shift = 1.0 - min;
        for p in &mut perf {
            *p += shift;
        }
        offset += shift;
    }
    let mut names: Vec<String> = (0..spec.n_binary).map(|i| format!("b{i}")).collect();
    names.extend((0..spec.n_numeric).map(|i| format!("n{i}")));
    let table = ConfigurationTable::new(
        spec.name.clone(),
        names,
        rows.into_iter().map(FeatureVector).collect(),
        perf,
    )?;
    Ok(SyntheticSystem { table, model, offset })
}

pub fn generate(spec: &SynthSpec) -> Result<ConfigurationTable> {
    generate_system(spec).map(|s| s.table)
}
