//! Observational datasets: CSV loading, stratification by covariate
//! configuration, support diagnostics, and maximum-likelihood CPT fitting.
//!
//! Records are kept in file order throughout; every downstream estimator
//! relies on that order for reproducible summation.

use crate::model::{CausalGraph, CptSet, ModelError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("row {row}, column `{column}`: {message}")]
    Cell { row: u64, column: String, message: String },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("column `{0}` assigned more than one role")]
    DuplicateRole(String),
    #[error("dataset has no records")]
    Empty,
    #[error("columns have mismatched lengths")]
    LengthMismatch,
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("graph node `{0}` is not a dataset column")]
    MissingNode(String),
    #[error("row {row}: column `{column}` has value {value}, cardinality is {card}")]
    CardinalityMismatch { row: usize, column: String, value: usize, card: usize },
    #[error("maximum-likelihood fit needs a categorical outcome")]
    CategoricalOutcomeRequired,
    #[error("discretize needs at least one bin and one value")]
    EmptyDiscretize,
    #[error("model: {0}")]
    Model(#[from] ModelError),
}

/// Outcome column: binary codes or real values. Estimators read both
/// through [`Dataset::outcome_value`], binary as 0.0/1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutcomeColumn {
    Binary(Vec<u8>),
    Real(Vec<f64>),
}

impl OutcomeColumn {
    pub fn len(&self) -> usize {
        match self {
            OutcomeColumn::Binary(v) => v.len(),
            OutcomeColumn::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, OutcomeColumn::Binary(_))
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            OutcomeColumn::Binary(v) => v[i] as f64,
            OutcomeColumn::Real(v) => v[i],
        }
    }
}

/// Column roles for reading a CSV file. Columns not named here are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub covariates: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    pub real_outcome: bool,
}

/// An immutable dataset: named categorical covariates, a binary treatment,
/// and an outcome column, all of equal length and in record order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Vec<(String, Vec<usize>)>,
    treatment_name: String,
    treatment: Vec<u8>,
    outcome_name: String,
    outcome: OutcomeColumn,
}

impl Dataset {
    pub fn new(
        covariates: Vec<(String, Vec<usize>)>,
        treatment: (String, Vec<u8>),
        outcome: (String, OutcomeColumn),
    ) -> Result<Self, DataError> {
        let n = treatment.1.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        if outcome.1.len() != n || covariates.iter().any(|(_, v)| v.len() != n) {
            return Err(DataError::LengthMismatch);
        }
        let mut names: Vec<&str> = covariates.iter().map(|(c, _)| c.as_str()).collect();
        names.push(&treatment.0);
        names.push(&outcome.0);
        let mut sorted = names.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(DataError::DuplicateRole(w[0].to_string()));
            }
        }
        if treatment.1.iter().any(|&z| z > 1) {
            return Err(DataError::Cell {
                row: 0,
                column: treatment.0.clone(),
                message: "treatment codes must be 0 or 1".into(),
            });
        }
        Ok(Dataset {
            covariates,
            treatment_name: treatment.0,
            treatment: treatment.1,
            outcome_name: outcome.0,
            outcome: outcome.1,
        })
    }

    pub fn n(&self) -> usize {
        self.treatment.len()
    }

    pub fn covariate_names(&self) -> Vec<&str> {
        self.covariates.iter().map(|(c, _)| c.as_str()).collect()
    }

    pub fn covariate(&self, name: &str) -> Option<&[usize]> {
        self.covariates
            .iter()
            .find(|(c, _)| c == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn treatment_name(&self) -> &str {
        &self.treatment_name
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &OutcomeColumn {
        &self.outcome
    }

    pub fn outcome_value(&self, i: usize) -> f64 {
        self.outcome.value(i)
    }

    /// Per-row codes for any column by role name (covariate, treatment, or a
    /// categorical outcome). Real outcomes have no categorical view.
    pub fn codes(&self, name: &str) -> Result<Vec<usize>, DataError> {
        if name == self.treatment_name {
            return Ok(self.treatment.iter().map(|&z| z as usize).collect());
        }
        if name == self.outcome_name {
            return match &self.outcome {
                OutcomeColumn::Binary(v) => Ok(v.iter().map(|&y| y as usize).collect()),
                OutcomeColumn::Real(_) => Err(DataError::CategoricalOutcomeRequired),
            };
        }
        self.covariate(name)
            .map(|v| v.to_vec())
            .ok_or_else(|| DataError::MissingNode(name.to_string()))
    }

    /// Restriction to `rows`, preserving their relative order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset, DataError> {
        let covariates = self
            .covariates
            .iter()
            .map(|(c, v)| (c.clone(), rows.iter().map(|&r| v[r]).collect()))
            .collect();
        let treatment = rows.iter().map(|&r| self.treatment[r]).collect();
        let outcome = match &self.outcome {
            OutcomeColumn::Binary(v) => OutcomeColumn::Binary(rows.iter().map(|&r| v[r]).collect()),
            OutcomeColumn::Real(v) => OutcomeColumn::Real(rows.iter().map(|&r| v[r]).collect()),
        };
        Dataset::new(
            covariates,
            (self.treatment_name.clone(), treatment),
            (self.outcome_name.clone(), outcome),
        )
    }
}

/// Read a dataset from CSV under the given schema. Cells must be present
/// and numeric; any defect reports the file row and column.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io(std::io::Error::new(
                std::io::ErrorKind::Other,
                format!("{}: {e}", path.display()),
            )),
            _ => DataError::Csv(e.to_string()),
        })?;
    let headers = reader.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
    let col = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let cov_idx: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let t_idx = col(&schema.treatment)?;
    let y_idx = col(&schema.outcome)?;

    let mut covs: Vec<Vec<usize>> = vec![Vec::new(); cov_idx.len()];
    let mut treatment: Vec<u8> = Vec::new();
    let mut y_bin: Vec<u8> = Vec::new();
    let mut y_real: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |idx: usize, column: &str| -> Result<&str, DataError> {
            match record.get(idx) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(DataError::Cell {
                    row: line,
                    column: column.to_string(),
                    message: "missing value".into(),
                }),
            }
        };
        for (k, &idx) in cov_idx.iter().enumerate() {
            let name = &schema.covariates[k];
            let s = cell(idx, name)?;
            let v: usize = s.parse().map_err(|_| DataError::Cell {
                row: line,
                column: name.clone(),
                message: format!("`{s}` is not a categorical code"),
            })?;
            covs[k].push(v);
        }
        let s = cell(t_idx, &schema.treatment)?;
        match s {
            "0" => treatment.push(0),
            "1" => treatment.push(1),
            _ => {
                return Err(DataError::Cell {
                    row: line,
                    column: schema.treatment.clone(),
                    message: format!("treatment must be 0 or 1, got `{s}`"),
                })
            }
        }
        let s = cell(y_idx, &schema.outcome)?;
        if schema.real_outcome {
            let v: f64 = s.parse().map_err(|_| DataError::Cell {
                row: line,
                column: schema.outcome.clone(),
                message: format!("`{s}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Cell {
                    row: line,
                    column: schema.outcome.clone(),
                    message: "outcome must be finite".into(),
                });
            }
            y_real.push(v);
        } else {
            match s {
                "0" => y_bin.push(0),
                "1" => y_bin.push(1),
                _ => {
                    return Err(DataError::Cell {
                        row: line,
                        column: schema.outcome.clone(),
                        message: format!("binary outcome must be 0 or 1, got `{s}`"),
                    })
                }
            }
        }
    }
    let outcome = if schema.real_outcome {
        OutcomeColumn::Real(y_real)
    } else {
        OutcomeColumn::Binary(y_bin)
    };
    let covariates = schema
        .covariates
        .iter()
        .cloned()
        .zip(covs)
        .collect();
    Dataset::new(covariates, (schema.treatment.clone(), treatment), (schema.outcome.clone(), outcome))
}

/// Write a dataset as CSV: covariates in declared order, then treatment,
/// then outcome. Loading the result under the same schema round-trips.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut out = String::new();
    let mut header: Vec<&str> = ds.covariate_names();
    header.push(ds.treatment_name());
    header.push(ds.outcome_name());
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.n() {
        for (_, v) in &ds.covariates {
            let _ = write!(out, "{},", v[i]);
        }
        let _ = write!(out, "{},", ds.treatment[i]);
        match &ds.outcome {
            OutcomeColumn::Binary(v) => {
                let _ = write!(out, "{}", v[i]);
            }
            OutcomeColumn::Real(v) => {
                let _ = write!(out, "{}", v[i]);
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Equal-frequency discretization of a real column into `bins` codes.
/// Cut points are the j/bins empirical quantiles; a value equal to a cut
/// point goes to the lower bin.
pub fn discretize(values: &[f64], bins: usize) -> Result<Vec<usize>, DataError> {
    if bins == 0 || values.is_empty() {
        return Err(DataError::EmptyDiscretize);
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let cuts: Vec<f64> = (1..bins)
        .map(|j| sorted[(j * n).div_ceil(bins).saturating_sub(1).min(n - 1)])
        .collect();
    Ok(values
        .iter()
        .map(|&v| cuts.iter().filter(|&&c| c < v).count())
        .collect())
}

/// Per-stratum record lists and outcome sums for one covariate subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub rows: Vec<usize>,
    pub n_treated: usize,
    pub n_control: usize,
    pub sum_y_treated: f64,
    pub sum_y_control: f64,
}

impl Stratum {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn mean_treated(&self) -> Option<f64> {
        (self.n_treated > 0).then(|| self.sum_y_treated / self.n_treated as f64)
    }

    pub fn mean_control(&self) -> Option<f64> {
        (self.n_control > 0).then(|| self.sum_y_control / self.n_control as f64)
    }

    /// True when either arm is empty.
    pub fn violates_support(&self) -> bool {
        self.n_treated == 0 || self.n_control == 0
    }
}

/// Records grouped by their configuration over a chosen covariate subset.
/// Keys iterate in lexicographic order, which fixes every per-stratum sum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumIndex {
    covariates: Vec<String>,
    strata: BTreeMap<Vec<usize>, Stratum>,
    n: usize,
}

impl StratumIndex {
    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn strata(&self) -> impl Iterator<Item = (&Vec<usize>, &Stratum)> {
        self.strata.iter()
    }

    pub fn get(&self, key: &[usize]) -> Option<&Stratum> {
        self.strata.get(key)
    }

    /// Human-readable stratum key, e.g. `x1=0,x2=2`.
    pub fn label(&self, key: &[usize]) -> String {
        if self.covariates.is_empty() {
            return "(all)".to_string();
        }
        self.covariates
            .iter()
            .zip(key)
            .map(|(c, v)| format!("{c}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Group records by their configuration over `covariates` (may be empty,
/// giving a single stratum). Sums accumulate in record order.
pub fn build_strata(ds: &Dataset, covariates: &[String]) -> Result<StratumIndex, DataError> {
    let cols: Vec<&[usize]> = covariates
        .iter()
        .map(|c| {
            ds.covariate(c)
                .ok_or_else(|| DataError::UnknownCovariate(c.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut strata: BTreeMap<Vec<usize>, Stratum> = BTreeMap::new();
    for i in 0..ds.n() {
        let key: Vec<usize> = cols.iter().map(|col| col[i]).collect();
        let s = strata.entry(key).or_insert_with(|| Stratum {
            rows: Vec::new(),
            n_treated: 0,
            n_control: 0,
            sum_y_treated: 0.0,
            sum_y_control: 0.0,
        });
        s.rows.push(i);
        if ds.treatment()[i] == 1 {
            s.n_treated += 1;
            s.sum_y_treated += ds.outcome_value(i);
        } else {
            s.n_control += 1;
            s.sum_y_control += ds.outcome_value(i);
        }
    }
    Ok(StratumIndex { covariates: covariates.to_vec(), strata, n: ds.n() })
}

/// One stratum with an empty treated or control arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportViolation {
    pub key: Vec<usize>,
    pub label: String,
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub mass: f64,
}

/// Common-support diagnostics over a stratum index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub violations: Vec<SupportViolation>,
    /// Fraction of records sitting in violating strata.
    pub violating_mass: f64,
}

impl SupportReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_support(index: &StratumIndex) -> SupportReport {
    let mut violations = Vec::new();
    let mut mass = 0.0;
    for (key, s) in index.strata() {
        if s.violates_support() {
            let share = s.n() as f64 / index.n() as f64;
            violations.push(SupportViolation {
                key: key.clone(),
                label: index.label(key),
                n: s.n(),
                n_treated: s.n_treated,
                n_control: s.n_control,
                mass: share,
            });
            mass += share;
        }
    }
    SupportReport { violations, violating_mass: mass }
}

/// A parent configuration that never occurs in the data; its CPT row was
/// filled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnobservedRow {
    pub node: String,
    pub parent_states: Vec<usize>,
}

/// Maximum-likelihood CPTs plus the rows that had to be filled uniformly.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub cpts: CptSet,
    pub unobserved_rows: Vec<UnobservedRow>,
}

/// Fit every CPT of `graph` by empirical conditional frequencies. Each graph
/// node must be a dataset column (covariate, treatment, or categorical
/// outcome) with codes below the declared cardinality.
pub fn fit_mle(ds: &Dataset, graph: &CausalGraph) -> Result<MleFit, DataError> {
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(graph.node_count());
    for i in 0..graph.node_count() {
        let name = graph.node_name(i);
        let codes = ds.codes(name).map_err(|e| match e {
            DataError::MissingNode(_) => DataError::MissingNode(name.to_string()),
            other => other,
        })?;
        let card = graph.card(i);
        for (row, &v) in codes.iter().enumerate() {
            if v >= card {
                return Err(DataError::CardinalityMismatch {
                    row,
                    column: name.to_string(),
                    value: v,
                    card,
                });
            }
        }
        columns.push(codes);
    }
    let mut tables = Vec::with_capacity(graph.node_count());
    let mut unobserved = Vec::new();
    for i in 0..graph.node_count() {
        let parents = graph.parents(i);
        let parent_cards: Vec<usize> = parents.iter().map(|&p| graph.card(p)).collect();
        let card = graph.card(i);
        let rows: usize = parent_cards.iter().product();
        let mut counts = vec![0u64; rows * card];
        for r in 0..ds.n() {
            let mut row = 0;
            for (&p, &c) in parents.iter().zip(&parent_cards) {
                row = row * c + columns[p][r];
            }
            counts[row * card + columns[i][r]] += 1;
        }
        let mut probs = vec![0.0; rows * card];
        for row in 0..rows {
            let total: u64 = counts[row * card..(row + 1) * card].iter().sum();
            if total == 0 {
                let mut states = vec![0usize; parents.len()];
                let mut rem = row;
                for j in (0..parents.len()).rev() {
                    states[j] = rem % parent_cards[j];
                    rem /= parent_cards[j];
                }
                unobserved.push(UnobservedRow {
                    node: graph.node_name(i).to_string(),
                    parent_states: states,
                });
                for s in 0..card {
                    probs[row * card + s] = 1.0 / card as f64;
                }
            } else {
                for s in 0..card {
                    probs[row * card + s] = counts[row * card + s] as f64 / total as f64;
                }
            }
        }
        tables.push(probs);
    }
    let cpts = CptSet::from_tables(graph, tables)?;
    Ok(MleFit { cpts, unobserved_rows: unobserved })
}
