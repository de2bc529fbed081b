//! Experiment orchestration.
//!
//! Every (dataset, approach, repeat) cell is independent: its pool split and
//! its sampler draw order are seeded from a stable hash of the master seed,
//! the repeat index and the names involved, so a single cell can be re-run
//! in isolation and cells can execute in any order on any number of threads.
//! Aggregation folds over cells sorted by (dataset, approach, repeat).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, ConfigurationTable, Schema, SplitFractions};
use crate::error::{Error, Result};
use crate::metrics::{rank_difference_of_optimum, TracePoint};
use crate::samplers::{predict_optimum, Approach, SamplerParams, Termination};
use crate::stats::{median_iqr, scott_knott, BootstrapConfig, SkRankTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<PathBuf>,
    pub schema_performance_column: Option<String>,
    pub maximize_performance: bool,
    pub approaches: Vec<Approach>,
    pub repeats: usize,
    pub fractions: SplitFractions,
    pub sampler: SamplerParams,
    pub bootstrap: BootstrapConfig,
    pub master_seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    pub output_dir: Option<PathBuf>,
    pub lives_sweep: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: Vec::new(),
            schema_performance_column: None,
            maximize_performance: false,
            approaches: Approach::ALL.to_vec(),
            repeats: 20,
            fractions: SplitFractions::default(),
            sampler: SamplerParams::default(),
            bootstrap: BootstrapConfig::default(),
            master_seed: 0,
            jobs: 0,
            output_dir: None,
            lives_sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::arg("repeats must be at least 1"));
        }
        if self.approaches.is_empty() {
            return Err(Error::arg("at least one approach is required"));
        }
        self.fractions.validate()?;
        self.sampler.validate()?;
        if let Some(lives) = &self.lives_sweep {
            if lives.is_empty() || lives.contains(&0) {
                return Err(Error::arg("lives sweep values must be non-empty and at least 1"));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema {
            performance_column: self.schema_performance_column.clone(),
            negate_performance: self.maximize_performance,
        }
    }

    /// Loads every dataset path; a table is named after its file stem.
    pub fn load_datasets(&self) -> Result<Vec<ConfigurationTable>> {
        let schema = self.schema();
        self.datasets
            .iter()
            .map(|path| {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                let file = fs::File::open(path).map_err(|e| Error::Dataset {
                    name: name.clone(),
                    source: Box::new(Error::io(path, e)),
                })?;
                dataset::load_table(file, &schema, name.clone()).map_err(|e| Error::Dataset {
                    name,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// Stable 64-bit seed for a named stream under a master seed.
///
/// FNV-1a over the master seed, the repeat index and the labels (each
/// label terminated by a zero byte), finished with the SplitMix64 mixer.
pub fn derive_seed(master: u64, repeat: usize, labels: &[&str]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    feed(&master.to_le_bytes());
    feed(&(repeat as u64).to_le_bytes());
    for label in labels {
        feed(label.as_bytes());
        feed(&[0]);
    }
    let mut z = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Result of one (dataset, approach, repeat) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub approach: Approach,
    pub repeat: usize,
    pub split_seed: u64,
    pub sampler_seed: u64,
    pub validation_size: usize,
    pub rd: Option<usize>,
    pub measurements: Option<usize>,
    pub predicted_optimum: Option<usize>,
    pub termination: Option<Termination>,
    pub trace: Vec<TracePoint>,
    pub correlation_trace: Vec<Option<f64>>,
    pub skip_reason: Option<String>,
}

/// Aggregates for one (dataset, approach) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub approach: Approach,
    pub completed: usize,
    pub skipped: usize,
    pub skip_reason: Option<String>,
    pub median_rd: Option<f64>,
    pub iqr_rd: Option<f64>,
    pub mean_rd: Option<f64>,
    pub median_measurements: Option<f64>,
    /// Median measurements as a percentage of projective's median on the
    /// same dataset.
    pub measurement_ratio_vs_projective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub rows: usize,
    pub features: usize,
    pub cells: Vec<CellResult>,
    pub summaries: Vec<ApproachSummary>,
    /// Scott-Knott ranks over RD samples; absent with fewer than two repeats.
    pub sk_table: Option<SkRankTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub repeats: usize,
    pub fractions: SplitFractions,
    pub sampler: SamplerParams,
    pub datasets: Vec<DatasetReport>,
}

impl ExperimentReport {
    pub fn dataset(&self, name: &str) -> Option<&DatasetReport> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

impl DatasetReport {
    pub fn summary(&self, approach: Approach) -> Option<&ApproachSummary> {
        self.summaries.iter().find(|s| s.approach == approach)
    }

    pub fn cells_for(&self, approach: Approach) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.approach == approach)
    }
}

/// Runs one cell from scratch.
pub fn run_cell(
    table: &ConfigurationTable,
    approach: Approach,
    repeat: usize,
    fractions: SplitFractions,
    params: &SamplerParams,
    master_seed: u64,
) -> Result<CellResult> {
    let split_seed = derive_seed(master_seed, repeat, &["split", table.name()]);
    let sampler_seed = derive_seed(master_seed, repeat, &[approach.name(), table.name()]);
    let split = dataset::split(table, fractions, split_seed)?;
    let mut cell = CellResult {
        dataset: table.name().to_string(),
        approach,
        repeat,
        split_seed,
        sampler_seed,
        validation_size: split.validation_pool.len(),
        rd: None,
        measurements: None,
        predicted_optimum: None,
        termination: None,
        trace: Vec::new(),
        correlation_trace: Vec::new(),
        skip_reason: None,
    };
    let outcome = match approach.run(&split, table, params, sampler_seed) {
        Ok(o) => o,
        Err(e) => {
            cell.skip_reason = Some(e.to_string());
            return Ok(cell);
        }
    };
    let best = predict_optimum(&outcome.model, &split.validation_pool, table)?;
    let ranks = dataset::true_ranks(table, &split.validation_pool)?;
    cell.rd = Some(rank_difference_of_optimum(&ranks, best)?);
    cell.measurements = Some(outcome.measurement_count);
    cell.predicted_optimum = Some(best);
    cell.termination = Some(outcome.termination);
    cell.trace = outcome.trace.points().to_vec();
    cell.correlation_trace = outcome.correlation_trace;
    Ok(cell)
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn summarize(cells: &[CellResult], approaches: &[Approach]) -> Result<Vec<ApproachSummary>> {
    let mut summaries = Vec::new();
    for &approach in approaches {
        let mine: Vec<&CellResult> = cells.iter().filter(|c| c.approach == approach).collect();
        let rds: Vec<f64> = mine.iter().filter_map(|c| c.rd).map(|v| v as f64).collect();
        let ms: Vec<f64> = mine.iter().filter_map(|c| c.measurements).map(|v| v as f64).collect();
        let skipped: Vec<&CellResult> = mine.iter().copied().filter(|c| c.skip_reason.is_some()).collect();
        let (median_rd, iqr_rd) = match median_iqr(&rds) {
            Ok((m, i)) => (Some(m), Some(i)),
            Err(_) => (None, None),
        };
        summaries.push(ApproachSummary {
            approach,
            completed: rds.len(),
            skipped: skipped.len(),
            skip_reason: skipped.first().and_then(|c| c.skip_reason.clone()),
            median_rd,
            iqr_rd,
            mean_rd: (!rds.is_empty()).then(|| rds.iter().sum::<f64>() / rds.len() as f64),
            median_measurements: median_iqr(&ms).ok().map(|(m, _)| m),
            measurement_ratio_vs_projective: None,
        });
    }
    let base = summaries
        .iter()
        .find(|s| s.approach == Approach::Projective)
        .and_then(|s| s.median_measurements);
    if let Some(base) = base.filter(|b| *b > 0.0) {
        for s in &mut summaries {
            s.measurement_ratio_vs_projective = s.median_measurements.map(|m| m / base * 100.0);
        }
    }
    Ok(summaries)
}

fn sk_for(
    cells: &[CellResult],
    approaches: &[Approach],
    config: &ExperimentConfig,
    dataset: &str,
) -> Result<Option<SkRankTable>> {
    let mut treatments = BTreeMap::new();
    for &approach in approaches {
        let rds: Vec<f64> = cells
            .iter()
            .filter(|c| c.approach == approach)
            .filter_map(|c| c.rd)
            .map(|v| v as f64)
            .collect();
        if rds.len() >= 2 {
            treatments.insert(approach.name().to_string(), rds);
        }
    }
    if treatments.is_empty() {
        return Ok(None);
    }
    let seed = derive_seed(config.master_seed, 0, &["scott_knott", dataset]);
    scott_knott(&treatments, config.bootstrap, seed).map(Some)
}

/// Runs every configured approach on every table.
pub fn run_on_tables(config: &ExperimentConfig, tables: &[ConfigurationTable]) -> Result<ExperimentReport> {
    config.validate()?;
    let mut approaches = config.approaches.clone();
    approaches.sort_unstable();
    approaches.dedup();

    let mut jobs = Vec::new();
    for (t, _) in tables.iter().enumerate() {
        for &approach in &approaches {
            for repeat in 0..config.repeats {
                jobs.push((t, approach, repeat));
            }
        }
    }
    let results: Vec<Result<CellResult>> = with_pool(config.jobs, || {
        jobs.par_iter()
            .map(|&(t, approach, repeat)| {
                run_cell(
                    &tables[t],
                    approach,
                    repeat,
                    config.fractions,
                    &config.sampler,
                    config.master_seed,
                )
                .map_err(|e| Error::Dataset {
                    name: tables[t].name().to_string(),
                    source: Box::new(e),
                })
            })
            .collect()
    })?;
    let mut cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    cells.sort_by(|a, b| (&a.dataset, a.approach, a.repeat).cmp(&(&b.dataset, b.approach, b.repeat)));

    let mut datasets = Vec::new();
    for table in tables {
        let mine: Vec<CellResult> = cells.iter().filter(|c| c.dataset == table.name()).cloned().collect();
        let summaries = summarize(&mine, &approaches)?;
        let sk_table = sk_for(&mine, &approaches, config, table.name())?;
        datasets.push(DatasetReport {
            name: table.name().to_string(),
            rows: table.len(),
            features: table.n_features(),
            cells: mine,
            summaries,
            sk_table,
        });
    }
    Ok(ExperimentReport {
        master_seed: config.master_seed,
        repeats: config.repeats,
        fractions: config.fractions,
        sampler: config.sampler,
        datasets,
    })
}

/// Loads the configured datasets and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let tables = config.load_datasets()?;
    let mut names: Vec<&str> = tables.iter().map(|t| t.name()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::arg("dataset names (file stems) must be unique"));
    }
    run_on_tables(config, &tables)
}

/// One point of the lives trade-off curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dataset: String,
    pub lives: usize,
    pub median_measurements: f64,
    pub median_rd: f64,
    /// Median true rank of the predicted optimum (1 is best).
    pub median_best_rank: f64,
}

/// Runs rank-based sampling once per lives value. Each repeat uses the same
/// split and draw order for every lives value.
pub fn sweep_lives(
    config: &ExperimentConfig,
    tables: &[ConfigurationTable],
    lives_values: &[usize],
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if lives_values.is_empty() || lives_values.contains(&0) {
        return Err(Error::arg("lives values must be non-empty and at least 1"));
    }
    let mut jobs = Vec::new();
    for (t, _) in tables.iter().enumerate() {
        for &lives in lives_values {
            for repeat in 0..config.repeats {
                jobs.push((t, lives, repeat));
            }
        }
    }
    let results: Vec<Result<CellResult>> = with_pool(config.jobs, || {
        jobs.par_iter()
            .map(|&(t, lives, repeat)| {
                let params = SamplerParams {
                    lives,
                    ..config.sampler
                };
                run_cell(
                    &tables[t],
                    Approach::RankBased,
                    repeat,
                    config.fractions,
                    &params,
                    config.master_seed,
                )
                .map_err(|e| Error::Dataset {
                    name: tables[t].name().to_string(),
                    source: Box::new(e),
                })
            })
            .collect()
    })?;
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let per_point = config.repeats;
    for (chunk, (t, lives, _)) in cells.chunks(per_point).zip(jobs.iter().step_by(per_point)) {
        let ms: Vec<f64> = chunk.iter().filter_map(|c| c.measurements).map(|v| v as f64).collect();
        let rds: Vec<f64> = chunk.iter().filter_map(|c| c.rd).map(|v| v as f64).collect();
        if ms.is_empty() {
            let reason = chunk.iter().find_map(|c| c.skip_reason.clone()).unwrap_or_default();
            return Err(Error::Dataset {
                name: tables[*t].name().to_string(),
                source: Box::new(Error::arg(format!("rank-based sampling failed: {reason}"))),
            });
        }
        let median_rd = median_iqr(&rds)?.0;
        rows.push(SweepRow {
            dataset: tables[*t].name().to_string(),
            lives: *lives,
            median_measurements: median_iqr(&ms)?.0,
            median_rd,
            median_best_rank: median_rd + 1.0,
        });
    }
    Ok(rows)
}

/// Fails early when `dir` cannot be created or written.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".confrank-write-test");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    // no quoting in our CSV dialect
    s.replace([',', '\n', '\r'], ";")
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "dataset,approach,completed,skipped,median_rd,iqr_rd,mean_rd,median_measurements,ratio_vs_projective_pct,reason\n",
    );
    for d in &report.datasets {
        for s in &d.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                csv_field(&d.name),
                s.approach,
                s.completed,
                s.skipped,
                opt(s.median_rd),
                opt(s.iqr_rd),
                opt(s.mean_rd),
                opt(s.median_measurements),
                opt(s.measurement_ratio_vs_projective),
                csv_field(s.skip_reason.as_deref().unwrap_or("")),
            );
        }
    }
    out
}

pub fn traces_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("dataset,approach,repeat,iteration,training_size,measure,score,spearman\n");
    for d in &report.datasets {
        for c in &d.cells {
            for (i, p) in c.trace.iter().enumerate() {
                let measure = match p.measure_kind {
                    crate::metrics::MeasureKind::Mmre => "mmre",
                    crate::metrics::MeasureKind::MeanRankDifference => "mean_rank_difference",
                    crate::metrics::MeasureKind::Correlation => "correlation",
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    csv_field(&d.name),
                    c.approach,
                    c.repeat,
                    i + 1,
                    p.training_size,
                    measure,
                    p.score,
                    opt(c.correlation_trace.get(i).copied().flatten()),
                );
            }
        }
    }
    out
}

pub fn sk_tables_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for d in &report.datasets {
        let _ = writeln!(out, "== {} ({} rows) ==", d.name, d.rows);
        match &d.sk_table {
            Some(sk) => out.push_str(&sk.render()),
            None => out.push_str("(not enough completed repeats to rank)\n"),
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("dataset,lives,median_measurements,median_rd,median_best_rank\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.dataset),
            r.lives,
            r.median_measurements,
            r.median_rd,
            r.median_best_rank
        );
    }
    out
}

/// Writes report.json, summary.csv, sk_tables.txt and traces.csv. All
/// contents are rendered before the first file is written.
pub fn emit_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    let files = [
        ("report.json", json),
        ("summary.csv", summary_csv(report)),
        ("sk_tables.txt", sk_tables_text(report)),
        ("traces.csv", traces_csv(report)),
    ];
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
