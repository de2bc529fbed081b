//! Configuration tables: loading, validation, pool splitting and ground-truth
//! ranking.
//!
//! A table is a set of distinct configurations (feature vectors) with one
//! measured performance value each. Lower performance is better throughout
//! the crate; maximisation metrics are negated at load time.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One configuration: binary options as 0/1, numeric options as their value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    fn key(&self) -> Vec<u64> {
        // -0.0 and 0.0 are the same option value
        self.0.iter().map(|v| (v + 0.0).to_bits()).collect()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }
}

/// Column roles for [`load_table`].
#[derive(Debug, Clone, Default)]
pub struct Schema {
    /// Name of the performance column; the last column when `None`.
    pub performance_column: Option<String>,
    /// Negate the performance column so that larger-is-better metrics can be
    /// minimised.
    pub negate_performance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationTable {
    name: String,
    feature_names: Vec<String>,
    rows: Vec<FeatureVector>,
    performance: Vec<f64>,
}

impl ConfigurationTable {
    /// Builds a table, enforcing every table invariant.
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<FeatureVector>,
        performance: Vec<f64>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Schema("table has no rows".into()));
        }
        if rows.len() != performance.len() {
            return Err(Error::arg(format!(
                "{} rows but {} performance values",
                rows.len(),
                performance.len()
            )));
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(Error::Schema(format!(
                    "row {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    feature_names.len()
                )));
            }
            if let Some(j) = row.0.iter().position(|v| !v.is_finite()) {
                return Err(Error::Range {
                    row: i + 1,
                    column: feature_names[j].clone(),
                    value: row.0[j],
                });
            }
            if !performance[i].is_finite() {
                return Err(Error::Range {
                    row: i + 1,
                    column: "performance".into(),
                    value: performance[i],
                });
            }
            if let Some(&first) = seen.get(&row.key()) {
                return Err(Error::DuplicateRow {
                    first: first + 1,
                    second: i + 1,
                });
            }
            seen.insert(row.key(), i);
        }
        Ok(ConfigurationTable {
            name: name.into(),
            feature_names,
            rows,
            performance,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> &FeatureVector {
        &self.rows[index]
    }

    pub fn performance(&self) -> &[f64] {
        &self.performance
    }

    /// Measuring a configuration is a lookup of its recorded value.
    pub fn measure(&self, index: usize) -> f64 {
        self.performance[index]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Whether every value in the feature column is 0 or 1.
    pub fn is_binary_feature(&self, feature: usize) -> bool {
        self.rows.iter().all(|r| r.0[feature] == 0.0 || r.0[feature] == 1.0)
    }

    /// Writes the table as CSV with the performance column last.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = self.feature_names.join(",");
        if !header.is_empty() {
            header.push(',');
        }
        header.push_str("performance");
        writeln!(out, "{header}")?;
        for (row, perf) in self.rows.iter().zip(&self.performance) {
            for v in &row.0 {
                write!(out, "{v},")?;
            }
            writeln!(out, "{perf}")?;
        }
        Ok(())
    }
}

/// Parses a CSV configuration table.
///
/// The first line is the header. Fields are split on commas with no quoting.
/// Blank lines are skipped. Row numbers in errors count data rows from 1.
pub fn load_table<R: Read>(source: R, schema: &Schema, name: impl Into<String>) -> Result<ConfigurationTable> {
    let mut lines = BufReader::new(source).lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line.map_err(|e| Error::Schema(format!("unreadable header: {e}")))?;
                let line = line.trim_start_matches('\u{feff}').trim();
                if !line.is_empty() {
                    break line.to_string();
                }
            }
            None => return Err(Error::Schema("missing header row".into())),
        }
    };
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if columns.iter().any(String::is_empty) {
        return Err(Error::Schema(format!("empty column name in header {header:?}")));
    }
    for (i, c) in columns.iter().enumerate() {
        if columns[..i].contains(c) {
            return Err(Error::Schema(format!("duplicate column name {c:?}")));
        }
    }
    let perf_col = match &schema.performance_column {
        Some(name) => columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(format!("performance column {name:?} not in header")))?,
        None => columns.len() - 1,
    };
    let feature_names: Vec<String> = columns
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != perf_col)
        .map(|(_, c)| c.clone())
        .collect();

    let mut rows = Vec::new();
    let mut performance = Vec::new();
    let mut row_no = 0;
    for line in lines {
        let line = line.map_err(|e| Error::Parse {
            row: row_no + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        row_no += 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(Error::Parse {
                row: row_no,
                column: String::new(),
                message: format!("expected {} fields, found {}", columns.len(), cells.len()),
            });
        }
        let mut features = Vec::with_capacity(feature_names.len());
        let mut perf = 0.0;
        for (col, cell) in cells.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                column: columns[col].clone(),
                message: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Range {
                    row: row_no,
                    column: columns[col].clone(),
                    value,
                });
            }
            if col == perf_col {
                perf = if schema.negate_performance { -value } else { value };
            } else {
                features.push(value);
            }
        }
        rows.push(FeatureVector(features));
        performance.push(perf);
    }
    if rows.is_empty() {
        return Err(Error::Schema("table has no data rows".into()));
    }
    ConfigurationTable::new(name, feature_names, rows, performance)
}

/// Disjoint training, testing and validation pools over a table's rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSplit {
    pub training_pool: Vec<usize>,
    pub testing_pool: Vec<usize>,
    pub validation_pool: Vec<usize>,
    pub seed: u64,
}

/// Fractions for train/test/validation, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
    pub validate: f64,
}

impl SplitFractions {
    pub fn new(train: f64, test: f64, validate: f64) -> Result<Self> {
        let f = SplitFractions { train, test, validate };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.test, self.validate];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::arg(format!("split fractions must be positive: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.4,
            test: 0.2,
            validate: 0.4,
        }
    }
}

/// Shuffles the row indices with a seeded generator and partitions them.
///
/// Training and testing pools get `floor(n * fraction)` rows; the
/// validation pool takes the remainder.
pub fn split(table: &ConfigurationTable, fractions: SplitFractions, seed: u64) -> Result<PoolSplit> {
    fractions.validate()?;
    let n = table.len();
    if n < 3 {
        return Err(Error::arg(format!("need at least 3 rows to split, have {n}")));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let pool_size = |fraction: f64| ((n as f64) * fraction + 1e-9).floor() as usize;
    let n_train = pool_size(fractions.train);
    let n_test = pool_size(fractions.test);
    if n_train == 0 || n_test == 0 || n_train + n_test >= n {
        return Err(Error::arg(format!(
            "fractions {:?} leave an empty pool for {n} rows",
            (fractions.train, fractions.test, fractions.validate)
        )));
    }
    let validation_pool = indices.split_off(n_train + n_test);
    let testing_pool = indices.split_off(n_train);
    Ok(PoolSplit {
        training_pool: indices,
        testing_pool,
        validation_pool,
        seed,
    })
}

/// Ground-truth ranks of `indices`: the smallest performance gets rank 1,
/// ties go to the lower row index.
pub fn true_ranks(table: &ConfigurationTable, indices: &[usize]) -> Result<BTreeMap<usize, usize>> {
    if indices.is_empty() {
        return Err(Error::arg("cannot rank an empty index set"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= table.len()) {
        return Err(Error::arg(format!(
            "row index {bad} outside table of {} rows",
            table.len()
        )));
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != indices.len() {
        return Err(Error::arg("index set contains duplicates"));
    }
    sorted.sort_by(|&a, &b| table.performance[a].total_cmp(&table.performance[b]).then(a.cmp(&b)));
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(rank, idx)| (idx, rank + 1))
        .collect())
}
