//! Outcome-regression backends: stratum means, a single logistic fit of Y
//! on (Z, features), and externally supplied predictions. Each produces the
//! paired per-record vectors (Ŷ₁, Ŷ₀) the plug-in and DR estimators consume.

use crate::data::{Dataset, StratumIndex};
use crate::logistic::{
    self, DesignRecipe, FeatureSpec, LogisticError, LogisticFit,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutcomeError {
    #[error("{0}")]
    Logistic(#[from] LogisticError),
    #[error("logistic outcome model requires a binary outcome column")]
    BinaryOutcomeRequired,
    #[error("column {0:?} not in dataset")]
    UnknownColumn(String),
    #[error("covariate configuration {key:?} never seen when the model was fit")]
    UnseenConfiguration { key: Vec<usize> },
    #[error("{found} predictions for {expected} records")]
    LengthMismatch { expected: usize, found: usize },
    #[error("record {record}: prediction {value} is not usable here")]
    BadPrediction { record: usize, value: f64 },
    #[error("predictions file row {row}: {message}")]
    PredictionsFile { row: u64, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeKind {
    StratumMean,
    Logistic,
    External,
}

/// One (z, x) cell of a stratum-mean model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMean {
    /// Observations behind the mean; 0 when the cell was filled by fallback.
    pub n: usize,
    pub mean: f64,
    /// True when the cell was empty and took the arm-marginal mean instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeModel {
    StratumMean {
        covariates: Vec<String>,
        /// Mean per (z, covariate configuration); every configuration seen in
        /// the fitting data has both arms present, by fallback if necessary.
        cells: BTreeMap<(u8, Vec<usize>), CellMean>,
        /// Marginal mean of Y in arm z — the fallback value for empty cells.
        arm_means: [f64; 2],
    },
    Logistic {
        recipe: DesignRecipe,
        fit: LogisticFit,
    },
    External {
        yhat1: Vec<f64>,
        yhat0: Vec<f64>,
    },
}

impl OutcomeModel {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            OutcomeModel::StratumMean { .. } => OutcomeKind::StratumMean,
            OutcomeModel::Logistic { .. } => OutcomeKind::Logistic,
            OutcomeModel::External { .. } => OutcomeKind::External,
        }
    }

    /// Cells that were empty at fit time and hold the arm-marginal fallback.
    pub fn fallback_cells(&self) -> Vec<(u8, Vec<usize>)> {
        match self {
            OutcomeModel::StratumMean { cells, .. } => cells
                .iter()
                .filter(|(_, c)| c.fallback)
                .map(|(k, _)| k.clone())
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Paired per-record predictions under both treatment arms.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPredictions {
    pub yhat1: Vec<f64>,
    pub yhat0: Vec<f64>,
    pub kind: OutcomeKind,
    /// Names behind the configuration keys below; empty for external models.
    pub covariates: Vec<String>,
    /// Fallback cells a prediction actually relied on.
    pub fallback_cells_used: Vec<(u8, Vec<usize>)>,
}

impl ArmPredictions {
    pub fn n(&self) -> usize {
        self.yhat1.len()
    }

    /// The classifier variant: every prediction snapped to {0, 1} at the
    /// 0.5 boundary, ties going to 1.
    pub fn thresholded(&self) -> ArmPredictions {
        let snap = |v: &f64| if *v >= 0.5 { 1.0 } else { 0.0 };
        ArmPredictions {
            yhat1: self.yhat1.iter().map(snap).collect(),
            yhat0: self.yhat0.iter().map(snap).collect(),
            kind: self.kind,
            covariates: self.covariates.clone(),
            fallback_cells_used: self.fallback_cells_used.clone(),
        }
    }
}

/// Empirical mean of Y per (z, x) cell. Cells with no observations take the
/// marginal mean of Y in their arm and are flagged; an arm empty in the whole
/// dataset falls back once more, to the overall mean of Y.
pub fn fit_stratum_means(ds: &Dataset, index: &StratumIndex) -> OutcomeModel {
    let n = ds.n();
    let mut sum_all = 0.0;
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for i in 0..n {
        let y = ds.outcome_value(i);
        let z = ds.treatment()[i] as usize;
        sum_all += y;
        sums[z] += y;
        counts[z] += 1;
    }
    let overall = sum_all / n as f64;
    let arm_means = [
        if counts[0] > 0 { sums[0] / counts[0] as f64 } else { overall },
        if counts[1] > 0 { sums[1] / counts[1] as f64 } else { overall },
    ];
    let mut cells = BTreeMap::new();
    for (key, s) in index.strata() {
        let treated = match s.mean_treated() {
            Some(m) => CellMean { n: s.n_treated, mean: m, fallback: false },
            None => CellMean { n: 0, mean: arm_means[1], fallback: true },
        };
        let control = match s.mean_control() {
            Some(m) => CellMean { n: s.n_control, mean: m, fallback: false },
            None => CellMean { n: 0, mean: arm_means[0], fallback: true },
        };
        cells.insert((1u8, key.clone()), treated);
        cells.insert((0u8, key.clone()), control);
    }
    OutcomeModel::StratumMean { covariates: index.covariates().to_vec(), cells, arm_means }
}

/// One logistic fit of Y on (Z, features); predictions are the fitted
/// probabilities with Z clamped to each arm. Binary outcome only.
pub fn fit_outcome_logistic(
    ds: &Dataset,
    spec: &FeatureSpec,
) -> Result<OutcomeModel, OutcomeError> {
    if !ds.outcome().is_binary() {
        return Err(OutcomeError::BinaryOutcomeRequired);
    }
    let (recipe, design) = DesignRecipe::from_dataset(ds, spec, true)?;
    let y: Vec<f64> = (0..ds.n()).map(|i| ds.outcome_value(i)).collect();
    let fit = logistic::fit_irls(&design, &y)?;
    Ok(OutcomeModel::Logistic { recipe, fit })
}

/// Externally supplied predictions, validated finite (and inside [0, 1]
/// when the dataset they are used with has a binary outcome — checked at
/// prediction time, since the file alone does not say).
pub fn external_predictions(
    yhat1: Vec<f64>,
    yhat0: Vec<f64>,
    expected_n: usize,
) -> Result<OutcomeModel, OutcomeError> {
    if yhat1.len() != expected_n || yhat0.len() != expected_n {
        return Err(OutcomeError::LengthMismatch {
            expected: expected_n,
            found: yhat1.len().max(yhat0.len()),
        });
    }
    for (i, v) in yhat1.iter().chain(yhat0.iter()).enumerate() {
        if !v.is_finite() {
            return Err(OutcomeError::BadPrediction { record: i % expected_n, value: *v });
        }
    }
    Ok(OutcomeModel::External { yhat1, yhat0 })
}

/// Evaluate the model at (z=1, x) and (z=0, x) for every record.
pub fn predict_both_arms(
    model: &OutcomeModel,
    ds: &Dataset,
) -> Result<ArmPredictions, OutcomeError> {
    let n = ds.n();
    match model {
        OutcomeModel::StratumMean { covariates, cells, .. } => {
            let cols: Vec<&[usize]> = covariates
                .iter()
                .map(|c| {
                    ds.covariate(c).ok_or_else(|| OutcomeError::UnknownColumn(c.clone()))
                })
                .collect::<Result<_, _>>()?;
            let mut yhat1 = Vec::with_capacity(n);
            let mut yhat0 = Vec::with_capacity(n);
            let mut used = BTreeMap::new();
            for i in 0..n {
                let key: Vec<usize> = cols.iter().map(|c| c[i]).collect();
                for (z, out) in [(1u8, &mut yhat1), (0u8, &mut yhat0)] {
                    let cell = cells
                        .get(&(z, key.clone()))
                        .ok_or_else(|| OutcomeError::UnseenConfiguration { key: key.clone() })?;
                    if cell.fallback {
                        used.insert((z, key.clone()), ());
                    }
                    out.push(cell.mean);
                }
            }
            Ok(ArmPredictions {
                yhat1,
                yhat0,
                kind: OutcomeKind::StratumMean,
                covariates: covariates.clone(),
                fallback_cells_used: used.into_keys().collect(),
            })
        }
        OutcomeModel::Logistic { recipe, fit } => {
            let cols: Vec<&[usize]> = recipe
                .columns
                .iter()
                .map(|c| {
                    ds.covariate(c).ok_or_else(|| OutcomeError::UnknownColumn(c.clone()))
                })
                .collect::<Result<_, _>>()?;
            let mut yhat1 = Vec::with_capacity(n);
            let mut yhat0 = Vec::with_capacity(n);
            for i in 0..n {
                let covs: Vec<usize> = cols.iter().map(|c| c[i]).collect();
                for (z, out) in [(1u8, &mut yhat1), (0u8, &mut yhat0)] {
                    let (row, seen) = recipe.feature_row(Some(z), &covs);
                    if !seen {
                        return Err(OutcomeError::UnseenConfiguration { key: covs.clone() });
                    }
                    let eta: f64 =
                        row.iter().zip(&fit.coefficients).map(|(x, b)| x * b).sum();
                    out.push(logistic::sigmoid(eta));
                }
            }
            Ok(ArmPredictions {
                yhat1,
                yhat0,
                kind: OutcomeKind::Logistic,
                covariates: recipe.columns.clone(),
                fallback_cells_used: Vec::new(),
            })
        }
        OutcomeModel::External { yhat1, yhat0 } => {
            if yhat1.len() != n {
                return Err(OutcomeError::LengthMismatch { expected: n, found: yhat1.len() });
            }
            if ds.outcome().is_binary() {
                for (i, v) in yhat1.iter().chain(yhat0.iter()).enumerate() {
                    if !(0.0..=1.0).contains(v) {
                        return Err(OutcomeError::BadPrediction {
                            record: i % n,
                            value: *v,
                        });
                    }
                }
            }
            Ok(ArmPredictions {
                yhat1: yhat1.clone(),
                yhat0: yhat0.clone(),
                kind: OutcomeKind::External,
                covariates: Vec::new(),
                fallback_cells_used: Vec::new(),
            })
        }
    }
}

/// Write `record,yhat1,yhat0` rows.
pub fn export_predictions_csv(
    path: &Path,
    preds: &ArmPredictions,
) -> Result<(), OutcomeError> {
    let mut out = String::from("record,yhat1,yhat0\n");
    for i in 0..preds.n() {
        let _ = writeln!(out, "{},{},{}", i, preds.yhat1[i], preds.yhat0[i]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read predictions produced elsewhere: `record,yhat1,yhat0` covering
/// records `0..n` in order.
pub fn import_predictions_csv(
    path: &Path,
    expected_n: usize,
) -> Result<OutcomeModel, OutcomeError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| OutcomeError::PredictionsFile { row: 0, message: e.to_string() })?;
    let mut yhat1 = Vec::new();
    let mut yhat0 = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| OutcomeError::PredictionsFile {
            row: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |j: usize, what: &str| -> Result<f64, OutcomeError> {
            record
                .get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| OutcomeError::PredictionsFile {
                    row: line,
                    message: format!("bad {what} value"),
                })
        };
        let idx: usize = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| {
            OutcomeError::PredictionsFile { row: line, message: "bad record index".into() }
        })?;
        if idx != yhat1.len() {
            return Err(OutcomeError::PredictionsFile {
                row: line,
                message: format!("expected record {}, found {idx}", yhat1.len()),
            });
        }
        yhat1.push(parse(1, "yhat1")?);
        yhat0.push(parse(2, "yhat0")?);
    }
    external_predictions(yhat1, yhat0, expected_n)
}
