//! Propensity scores: per-stratum sample proportions, logistic fits, equal
//! count score bins, and CSV exchange with external tools.

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
pub enum PropensityError {
    #[error("{0}")]
    Logistic(#[from] LogisticError),
    #[error("clip bounds must satisfy 0 < low <= high < 1, got [{low}, {high}]")]
    BadClipBounds { low: f64, high: f64 },
    #[error("cannot split {n} records into {k} non-empty bins")]
    BinCount { n: usize, k: usize },
    #[error("{found} scores for {expected} records")]
    LengthMismatch { expected: usize, found: usize },
    #[error("record {record}: score {score} outside [0, 1]")]
    ScoreRange { record: usize, score: f64 },
    #[error("scores file row {row}: {message}")]
    ScoresFile { row: u64, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Where a score vector came from. Identity diagnostics key off this tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SampleProportion,
    Logistic,
    External,
}

/// Clipping bounds applied only where a score lands exactly on 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipBounds {
    pub low: f64,
    pub high: f64,
}

impl Default for ClipBounds {
    fn default() -> Self {
        ClipBounds { low: 1e-6, high: 1.0 - 1e-6 }
    }
}

impl ClipBounds {
    pub fn new(low: f64, high: f64) -> Result<Self, PropensityError> {
        if !(low > 0.0 && low <= high && high < 1.0) {
            return Err(PropensityError::BadClipBounds { low, high });
        }
        Ok(ClipBounds { low, high })
    }
}

/// Estimated treatment probabilities, one per record, with enough context
/// to explain where they came from and what was clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityScores {
    pub(crate) per_record: Vec<f64>,
    /// Score per covariate configuration; absent for external scores.
    pub per_stratum: Option<BTreeMap<Vec<usize>, f64>>,
    pub covariates: Vec<String>,
    pub provenance: Provenance,
    pub clip: ClipBounds,
    /// Records whose raw score was 0 or 1 and got pulled to the bounds.
    pub clipped_records: Vec<usize>,
    /// Strata behind those records (sample-proportion scores only).
    pub clipped_strata: Vec<Vec<usize>>,
    pub logistic: Option<LogisticFit>,
}

impl PropensityScores {
    pub fn per_record(&self) -> &[f64] {
        &self.per_record
    }

    pub fn n(&self) -> usize {
        self.per_record.len()
    }

    /// True when clipping had to activate, i.e. some stratum had an empty arm.
    pub fn has_clipped(&self) -> bool {
        !self.clipped_records.is_empty()
    }

    /// External scores, validated to lie in [0, 1]; exact 0/1 values are
    /// clipped to the bounds and recorded.
    pub fn from_external(
        scores: Vec<f64>,
        expected_n: usize,
        clip: ClipBounds,
    ) -> Result<Self, PropensityError> {
        if scores.len() != expected_n {
            return Err(PropensityError::LengthMismatch {
                expected: expected_n,
                found: scores.len(),
            });
        }
        let mut per_record = scores;
        let mut clipped = Vec::new();
        for (i, e) in per_record.iter_mut().enumerate() {
            if !(*e >= 0.0 && *e <= 1.0) {
                return Err(PropensityError::ScoreRange { record: i, score: *e });
            }
            if *e == 0.0 {
                *e = clip.low;
                clipped.push(i);
            } else if *e == 1.0 {
                *e = clip.high;
                clipped.push(i);
            }
        }
        Ok(PropensityScores {
            per_record,
            per_stratum: None,
            covariates: Vec::new(),
            provenance: Provenance::External,
            clip,
            clipped_records: clipped,
            clipped_strata: Vec::new(),
            logistic: None,
        })
    }
}

/// Score each record with its stratum's treated share `N(1,x) / N(x)`.
/// Strata missing an arm land exactly on 0 or 1 and are clipped to the
/// bounds; interior scores are never touched.
pub fn propensity_sample_proportion(index: &StratumIndex, clip: ClipBounds) -> PropensityScores {
    let mut per_record = vec![0.0; index.n()];
    let mut per_stratum = BTreeMap::new();
    let mut clipped_records = Vec::new();
    let mut clipped_strata = Vec::new();
    for (key, s) in index.strata() {
        let raw = s.n_treated as f64 / s.n() as f64;
        let e = if raw == 0.0 {
            clip.low
        } else if raw == 1.0 {
            clip.high
        } else {
            raw
        };
        if e != raw {
            clipped_strata.push(key.clone());
            clipped_records.extend_from_slice(&s.rows);
        }
        per_stratum.insert(key.clone(), e);
        for &r in &s.rows {
            per_record[r] = e;
        }
    }
    clipped_records.sort_unstable();
    PropensityScores {
        per_record,
        per_stratum: Some(per_stratum),
        covariates: index.covariates().to_vec(),
        provenance: Provenance::SampleProportion,
        clip,
        clipped_records,
        clipped_strata,
        logistic: None,
    }
}

/// Fit `p(Z=1 | features)` by IRLS and score every record. Saturated
/// encoding reproduces the sample proportions up to solver tolerance.
pub fn propensity_logistic(
    ds: &Dataset,
    spec: &FeatureSpec,
    clip: ClipBounds,
) -> Result<PropensityScores, PropensityError> {
    let (_, design) = DesignRecipe::from_dataset(ds, spec, false)?;
    let z: Vec<f64> = ds.treatment().iter().map(|&v| v as f64).collect();
    let fit = logistic::fit_irls(&design, &z)?;
    let mut per_record = logistic::predict_proba(&design, &fit.coefficients);
    let mut clipped = Vec::new();
    for (i, e) in per_record.iter_mut().enumerate() {
        if *e == 0.0 {
            *e = clip.low;
            clipped.push(i);
        } else if *e == 1.0 {
            *e = clip.high;
            clipped.push(i);
        }
    }
    // scores are a function of the covariate configuration, so a stratum
    // level view exists; build it over the observed configurations
    let cols: Vec<&[usize]> = spec
        .columns
        .iter()
        .map(|c| ds.covariate(c).expect("validated by design build"))
        .collect();
    let mut per_stratum = BTreeMap::new();
    for i in 0..ds.n() {
        let key: Vec<usize> = cols.iter().map(|c| c[i]).collect();
        per_stratum.entry(key).or_insert(per_record[i]);
    }
    Ok(PropensityScores {
        per_record,
        per_stratum: Some(per_stratum),
        covariates: spec.columns.clone(),
        provenance: Provenance::Logistic,
        clip,
        clipped_records: clipped,
        clipped_strata: Vec::new(),
        logistic: Some(fit),
    })
}

/// Summary of one score bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    /// Share of all records, `r_s = N_s / N`.
    pub share: f64,
    /// Treated share inside the bin, `N(1,s) / N_s`.
    pub treated_share: f64,
    pub score_min: f64,
    pub score_max: f64,
}

/// Equal-count partition of records by score rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBins {
    pub k: usize,
    /// Bin per record, `0..k`.
    pub assignment: Vec<usize>,
    pub bins: Vec<BinStats>,
    /// The per-record scores the bins were built from.
    pub scores: Vec<f64>,
}

/// Split records into `k` bins of (near-)equal size by ascending score,
/// ties broken by record index; the first `n % k` bins take the extra
/// record. Requires `k <= n` so every bin is non-empty.
pub fn bin_scores(
    scores: &PropensityScores,
    treatment: &[u8],
    k: usize,
) -> Result<ScoreBins, PropensityError> {
    let n = scores.n();
    if treatment.len() != n {
        return Err(PropensityError::LengthMismatch { expected: n, found: treatment.len() });
    }
    if k == 0 || k > n {
        return Err(PropensityError::BinCount { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores.per_record[a]
            .partial_cmp(&scores.per_record[b])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    let base = n / k;
    let extra = n % k;
    let mut assignment = vec![0usize; n];
    let mut bins = Vec::with_capacity(k);
    let mut at = 0;
    for s in 0..k {
        let size = base + usize::from(s < extra);
        let members = &order[at..at + size];
        at += size;
        let mut n_treated = 0;
        for &r in members {
            assignment[r] = s;
            n_treated += usize::from(treatment[r] == 1);
        }
        let lo = scores.per_record[members[0]];
        let hi = scores.per_record[members[size - 1]];
        bins.push(BinStats {
            n: size,
            n_treated,
            n_control: size - n_treated,
            share: size as f64 / n as f64,
            treated_share: n_treated as f64 / size as f64,
            score_min: lo,
            score_max: hi,
        });
    }
    Ok(ScoreBins { k, assignment, bins, scores: scores.per_record.clone() })
}

/// Write `record,score[,bin]` rows (bins printed 1-based when given).
pub fn export_scores_csv(
    path: &Path,
    scores: &PropensityScores,
    bins: Option<&ScoreBins>,
) -> Result<(), PropensityError> {
    let mut out = String::new();
    out.push_str(if bins.is_some() { "record,score,bin\n" } else { "record,score\n" });
    for i in 0..scores.n() {
        match bins {
            Some(b) => {
                let _ = writeln!(out, "{},{},{}", i, scores.per_record[i], b.assignment[i] + 1);
            }
            None => {
                let _ = writeln!(out, "{},{}", i, scores.per_record[i]);
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read scores produced by an external tool: a `record,score[,bin]` CSV
/// covering records `0..n` in order. The result carries the `external`
/// provenance tag.
pub fn import_scores_csv(
    path: &Path,
    expected_n: usize,
    clip: ClipBounds,
) -> Result<PropensityScores, PropensityError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| PropensityError::ScoresFile { row: 0, message: e.to_string() })?;
    let mut scores = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| PropensityError::ScoresFile {
            row: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let idx: usize = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PropensityError::ScoresFile {
                row: line,
                message: "bad record index".into(),
            })?;
        if idx != scores.len() {
            return Err(PropensityError::ScoresFile {
                row: line,
                message: format!("expected record {}, found {idx}", scores.len()),
            });
        }
        let score: f64 = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PropensityError::ScoresFile {
                row: line,
                message: "bad score value".into(),
            })?;
        scores.push(score);
    }
    PropensityScores::from_external(scores, expected_n, clip)
}
