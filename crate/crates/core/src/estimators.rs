//! The five ATE estimators — adjustment, IPTW, stratified, plug-in
//! predicted, and doubly robust — plus the algebraic identities tying them
//! together. Every estimator sums in fixed record order (compensated, no
//! parallel reduction) so the exact-identity checks are reproducible.

use crate::data::{check_support, Dataset, DataError, StratumIndex};
use crate::outcome::{self, ArmPredictions, OutcomeError, OutcomeKind};
use crate::propensity::{
    self, bin_scores, ClipBounds, PropensityError, PropensityScores, Provenance, ScoreBins,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact identities between estimators must hold to this tolerance.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("common support violated in strata: {}", .0.join("; "))]
    Support(Vec<String>),
    #[error("record {record}: propensity {score} leaves a zero denominator")]
    DegenerateScore { record: usize, score: f64 },
    #[error("bin {bin} has no {arm} records")]
    SingleArmBin { bin: usize, arm: &'static str },
    #[error("dataset has no {0} records")]
    EmptyArm(&'static str),
    #[error("{found} values for {expected} records")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{name}: two computations of the same quantity disagree ({a} vs {b})")]
    FormDisagreement { name: &'static str, a: f64, b: f64 },
    #[error("estimate is not finite")]
    NonFinite,
    #[error("{0}")]
    Propensity(#[from] PropensityError),
    #[error("{0}")]
    Outcome(#[from] OutcomeError),
    #[error("{0}")]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Adjustment,
    Iptw,
    Stratified,
    PluginPredicted,
    Dr,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Adjustment => "adjustment",
            Method::Iptw => "iptw",
            Method::Stratified => "stratified",
            Method::PluginPredicted => "plugin-predicted",
            Method::Dr => "dr",
        }
    }
}

/// What to do with strata where one treatment arm is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportPolicy {
    /// Refuse to estimate: violated support is non-identification.
    Error,
    /// Drop violating strata and renormalize the stratum weights.
    DropAndRenormalize,
    /// Pull the violating strata's propensities to the clip bounds.
    ClipPropensity(ClipBounds),
}

impl Default for SupportPolicy {
    fn default() -> Self {
        SupportPolicy::Error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InputSummary {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propensity: Option<Provenance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome_model: Option<OutcomeKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_policy: Option<SupportPolicy>,
}

/// Every guard that fired on the way to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    /// Labels of strata with an empty treatment arm.
    pub support_violations: Vec<String>,
    /// Stratum mass removed by drop-and-renormalize.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped_mass: Option<f64>,
    /// Outcome-model cells that served their arm-marginal fallback.
    pub fallback_cells: Vec<String>,
    /// Records whose propensity was pulled off 0 or 1.
    pub clipped_records: Vec<usize>,
    /// DR only: true when the propensities are stratum sample proportions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propensity_leg: Option<bool>,
    /// DR only: true when the predictions come from stratum means.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome_leg: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub method: Method,
    pub estimate: f64,
    pub inputs: InputSummary,
    pub diagnostics: Diagnostics,
}

impl AteReport {
    fn finished(self) -> Result<AteReport, EstimateError> {
        if !self.estimate.is_finite() {
            return Err(EstimateError::NonFinite);
        }
        Ok(self)
    }
}

/// Compensated (Neumaier) accumulator. Same left-to-right order as a plain
/// loop, but the identity checks keep far more headroom under 1e-12.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn guard_scores(scores: &PropensityScores, n: usize) -> Result<(), EstimateError> {
    if scores.n() != n {
        return Err(EstimateError::LengthMismatch { expected: n, found: scores.n() });
    }
    for (i, &e) in scores.per_record().iter().enumerate() {
        if e <= 0.0 || e >= 1.0 {
            return Err(EstimateError::DegenerateScore { record: i, score: e });
        }
    }
    Ok(())
}

fn guard_predictions(preds: &ArmPredictions, n: usize) -> Result<(), EstimateError> {
    if preds.n() != n || preds.yhat0.len() != n {
        return Err(EstimateError::LengthMismatch { expected: n, found: preds.n() });
    }
    Ok(())
}

fn format_cells(cells: &[(u8, Vec<usize>)], covariates: &[String]) -> Vec<String> {
    cells
        .iter()
        .map(|(z, key)| {
            let mut parts = vec![format!("z={z}")];
            for (c, v) in covariates.iter().zip(key) {
                parts.push(format!("{c}={v}"));
            }
            parts.join(",")
        })
        .collect()
}

/// Difference of raw arm means, the estimator valid only under randomized
/// treatment (equivalently, stratification with a single bin).
pub fn naive_difference(ds: &Dataset) -> Result<f64, EstimateError> {
    let mut sums = [CompensatedSum::default(); 2];
    let mut counts = [0usize; 2];
    for i in 0..ds.n() {
        let z = ds.treatment()[i] as usize;
        sums[z].add(ds.outcome_value(i));
        counts[z] += 1;
    }
    if counts[1] == 0 {
        return Err(EstimateError::EmptyArm("treated"));
    }
    if counts[0] == 0 {
        return Err(EstimateError::EmptyArm("control"));
    }
    Ok(sums[1].value() / counts[1] as f64 - sums[0].value() / counts[0] as f64)
}

/// Adjustment estimator: Σ_x p̂(x)·[mean(Y|Z=1,x) − mean(Y|Z=0,x)], with
/// violating strata handled per the policy. Under clip-propensity every
/// stratum is evaluated in the equivalent form (S₁ₓ/eₓ − S₀ₓ/(1−eₓ))/N with
/// eₓ the clipped treated share — the same value for intact strata, and
/// exactly what IPTW computes from the same clipped scores elsewhere.
pub fn ate_adjustment(
    index: &StratumIndex,
    policy: SupportPolicy,
) -> Result<AteReport, EstimateError> {
    let n = index.n() as f64;
    let support = check_support(index);
    let violation_labels: Vec<String> =
        support.violations.iter().map(|v| v.label.clone()).collect();
    let mut diagnostics = Diagnostics {
        support_violations: violation_labels.clone(),
        ..Diagnostics::default()
    };
    let estimate = match policy {
        SupportPolicy::Error => {
            if !violation_labels.is_empty() {
                return Err(EstimateError::Support(violation_labels));
            }
            let mut acc = CompensatedSum::default();
            for (_, s) in index.strata() {
                let effect = s.mean_treated().unwrap() - s.mean_control().unwrap();
                acc.add(s.n() as f64 / n * effect);
            }
            acc.value()
        }
        SupportPolicy::DropAndRenormalize => {
            let mut mass = CompensatedSum::default();
            for (_, s) in index.strata() {
                if !s.violates_support() {
                    mass.add(s.n() as f64 / n);
                }
            }
            let kept = mass.value();
            if kept == 0.0 {
                return Err(EstimateError::Support(violation_labels));
            }
            diagnostics.dropped_mass = Some(support.violating_mass);
            let mut acc = CompensatedSum::default();
            for (_, s) in index.strata() {
                if s.violates_support() {
                    continue;
                }
                let effect = s.mean_treated().unwrap() - s.mean_control().unwrap();
                acc.add(s.n() as f64 / n / kept * effect);
            }
            acc.value()
        }
        SupportPolicy::ClipPropensity(clip) => {
            let mut acc = CompensatedSum::default();
            for (_, s) in index.strata() {
                let raw = s.n_treated as f64 / s.n() as f64;
                let e = raw.max(clip.low).min(clip.high);
                if e != raw {
                    diagnostics.clipped_records.extend_from_slice(&s.rows);
                }
                acc.add((s.sum_y_treated / e - s.sum_y_control / (1.0 - e)) / n);
            }
            diagnostics.clipped_records.sort_unstable();
            acc.value()
        }
    };
    AteReport {
        method: Method::Adjustment,
        estimate,
        inputs: InputSummary {
            n: index.n(),
            support_policy: Some(policy),
            ..InputSummary::default()
        },
        diagnostics,
    }
    .finished()
}

/// Inverse-probability weighting:
/// (1/N) Σ ZᵢYᵢ/eᵢ − (1/N) Σ (1−Zᵢ)Yᵢ/(1−eᵢ).
pub fn ate_iptw(
    ds: &Dataset,
    scores: &PropensityScores,
) -> Result<AteReport, EstimateError> {
    let n = ds.n();
    guard_scores(scores, n)?;
    let e = scores.per_record();
    let mut treated = CompensatedSum::default();
    let mut control = CompensatedSum::default();
    for i in 0..n {
        let y = ds.outcome_value(i);
        if ds.treatment()[i] == 1 {
            treated.add(y / e[i]);
        } else {
            control.add(y / (1.0 - e[i]));
        }
    }
    let nf = n as f64;
    AteReport {
        method: Method::Iptw,
        estimate: treated.value() / nf - control.value() / nf,
        inputs: InputSummary {
            n,
            propensity: Some(scores.provenance),
            ..InputSummary::default()
        },
        diagnostics: Diagnostics {
            clipped_records: scores.clipped_records.clone(),
            ..Diagnostics::default()
        },
    }
    .finished()
}

/// Stratified estimator over score bins:
/// Σ_s r_s Σᵢ ZᵢYᵢ/N₁ₛ·I(Sᵢ=s) − Σ_s r_s Σᵢ (1−Zᵢ)Yᵢ/N₀ₛ·I(Sᵢ=s).
pub fn ate_stratified(
    ds: &Dataset,
    bins: &ScoreBins,
) -> Result<AteReport, EstimateError> {
    let n = ds.n();
    if bins.assignment.len() != n {
        return Err(EstimateError::LengthMismatch { expected: n, found: bins.assignment.len() });
    }
    for (s, b) in bins.bins.iter().enumerate() {
        if b.n_treated == 0 {
            return Err(EstimateError::SingleArmBin { bin: s + 1, arm: "treated" });
        }
        if b.n_control == 0 {
            return Err(EstimateError::SingleArmBin { bin: s + 1, arm: "control" });
        }
    }
    // per-bin arm sums in record order, then the bin sweep in ascending s
    let mut sum_t = vec![CompensatedSum::default(); bins.k];
    let mut sum_c = vec![CompensatedSum::default(); bins.k];
    for i in 0..n {
        let s = bins.assignment[i];
        let y = ds.outcome_value(i);
        if ds.treatment()[i] == 1 {
            sum_t[s].add(y);
        } else {
            sum_c[s].add(y);
        }
    }
    let mut treated = CompensatedSum::default();
    let mut control = CompensatedSum::default();
    for s in 0..bins.k {
        let b = &bins.bins[s];
        treated.add(b.share * (sum_t[s].value() / b.n_treated as f64));
        control.add(b.share * (sum_c[s].value() / b.n_control as f64));
    }
    AteReport {
        method: Method::Stratified,
        estimate: treated.value() - control.value(),
        inputs: InputSummary { n, k: Some(bins.k), ..InputSummary::default() },
        diagnostics: Diagnostics::default(),
    }
    .finished()
}

/// Plug-in estimator with predicted outcomes in place of Y:
/// (1/N) Σ ZᵢŶ₁ᵢ/eᵢ − (1/N) Σ (1−Zᵢ)Ŷ₀ᵢ/(1−eᵢ).
pub fn ate_plugin_predicted(
    ds: &Dataset,
    scores: &PropensityScores,
    preds: &ArmPredictions,
) -> Result<AteReport, EstimateError> {
    let n = ds.n();
    guard_scores(scores, n)?;
    guard_predictions(preds, n)?;
    let e = scores.per_record();
    let mut treated = CompensatedSum::default();
    let mut control = CompensatedSum::default();
    for i in 0..n {
        if ds.treatment()[i] == 1 {
            treated.add(preds.yhat1[i] / e[i]);
        } else {
            control.add(preds.yhat0[i] / (1.0 - e[i]));
        }
    }
    let nf = n as f64;
    AteReport {
        method: Method::PluginPredicted,
        estimate: treated.value() / nf - control.value() / nf,
        inputs: InputSummary {
            n,
            propensity: Some(scores.provenance),
            outcome_model: Some(preds.kind),
            ..InputSummary::default()
        },
        diagnostics: Diagnostics {
            fallback_cells: format_cells(&preds.fallback_cells_used, &preds.covariates),
            clipped_records: scores.clipped_records.clone(),
            ..Diagnostics::default()
        },
    }
    .finished()
}

/// The plug-in bias term:
/// ρ_p′ = (1/N) Σ (Zᵢ−eᵢ)Ŷ₁ᵢ/eᵢ + (1/N) Σ (Zᵢ−eᵢ)Ŷ₀ᵢ/(1−eᵢ),
/// cross-checked against its other face, ρ_p − [mean(Ŷ₁) − mean(Ŷ₀)].
pub fn correction_term(
    ds: &Dataset,
    scores: &PropensityScores,
    preds: &ArmPredictions,
) -> Result<f64, EstimateError> {
    let n = ds.n();
    guard_scores(scores, n)?;
    guard_predictions(preds, n)?;
    let e = scores.per_record();
    let nf = n as f64;
    let mut first = CompensatedSum::default();
    let mut second = CompensatedSum::default();
    for i in 0..n {
        let z = ds.treatment()[i] as f64;
        first.add((z - e[i]) * preds.yhat1[i] / e[i]);
        second.add((z - e[i]) * preds.yhat0[i] / (1.0 - e[i]));
    }
    let direct = first.value() / nf + second.value() / nf;

    let plugin = ate_plugin_predicted(ds, scores, preds)?.estimate;
    let mut m1 = CompensatedSum::default();
    let mut m0 = CompensatedSum::default();
    for i in 0..n {
        m1.add(preds.yhat1[i]);
        m0.add(preds.yhat0[i]);
    }
    let via_plugin = plugin - (m1.value() / nf - m0.value() / nf);
    if (direct - via_plugin).abs() > IDENTITY_TOL {
        return Err(EstimateError::FormDisagreement {
            name: "correction term",
            a: direct,
            b: via_plugin,
        });
    }
    Ok(direct)
}

/// Doubly robust estimator: DR = IPTW − ρ_p′, cross-checked against the
/// expanded single-pass form
/// (1/N) Σ {ZᵢYᵢ/eᵢ − (Zᵢ−eᵢ)Ŷ₁ᵢ/eᵢ} − (1/N) Σ {(1−Zᵢ)Yᵢ/(1−eᵢ) + (Zᵢ−eᵢ)Ŷ₀ᵢ/(1−eᵢ)}.
pub fn ate_dr(
    ds: &Dataset,
    scores: &PropensityScores,
    preds: &ArmPredictions,
) -> Result<AteReport, EstimateError> {
    let n = ds.n();
    guard_scores(scores, n)?;
    guard_predictions(preds, n)?;
    let iptw = ate_iptw(ds, scores)?.estimate;
    let correction = correction_term(ds, scores, preds)?;
    let composed = iptw - correction;

    let e = scores.per_record();
    let nf = n as f64;
    let mut treated = CompensatedSum::default();
    let mut control = CompensatedSum::default();
    for i in 0..n {
        let z = ds.treatment()[i] as f64;
        let y = ds.outcome_value(i);
        treated.add((z * y - (z - e[i]) * preds.yhat1[i]) / e[i]);
        control.add(((1.0 - z) * y + (z - e[i]) * preds.yhat0[i]) / (1.0 - e[i]));
    }
    let expanded = treated.value() / nf - control.value() / nf;
    if (composed - expanded).abs() > IDENTITY_TOL {
        return Err(EstimateError::FormDisagreement {
            name: "doubly robust estimator",
            a: composed,
            b: expanded,
        });
    }
    AteReport {
        method: Method::Dr,
        estimate: composed,
        inputs: InputSummary {
            n,
            propensity: Some(scores.provenance),
            outcome_model: Some(preds.kind),
            ..InputSummary::default()
        },
        diagnostics: Diagnostics {
            fallback_cells: format_cells(&preds.fallback_cells_used, &preds.covariates),
            clipped_records: scores.clipped_records.clone(),
            propensity_leg: Some(scores.provenance == Provenance::SampleProportion),
            outcome_leg: Some(preds.kind == OutcomeKind::StratumMean),
            ..Diagnostics::default()
        },
    }
    .finished()
}

/// Propensity backend selection for [`estimate_all`].
#[derive(Debug, Clone, PartialEq)]
pub enum PropensityBackend {
    SampleProportion,
    Logistic(crate::logistic::FeatureSpec),
    External(Vec<f64>),
}

/// Outcome backend selection for [`estimate_all`].
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeBackend {
    StratumMean,
    Logistic(crate::logistic::FeatureSpec),
    External { yhat1: Vec<f64>, yhat0: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    /// Stratification covariates; empty means every covariate column.
    pub covariates: Vec<String>,
    pub propensity: PropensityBackend,
    pub outcome: OutcomeBackend,
    /// Number of score bins for the stratified estimator.
    pub k: usize,
    pub support: SupportPolicy,
    pub clip: ClipBounds,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            covariates: Vec::new(),
            propensity: PropensityBackend::SampleProportion,
            outcome: OutcomeBackend::StratumMean,
            k: 5,
            support: SupportPolicy::Error,
            clip: ClipBounds::default(),
        }
    }
}

/// One cross-estimator identity, evaluated on this run's actual outputs.
/// `applicable` records whether the chosen configuration satisfies the
/// identity's hypotheses; `holds`/`gap` are filled either way when both
/// sides exist, so a surprising failure is visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

impl IdentityCheck {
    fn evaluated(name: &str, applicable: bool, a: f64, b: f64) -> IdentityCheck {
        let gap = (a - b).abs();
        IdentityCheck {
            name: name.to_string(),
            applicable,
            holds: Some(gap <= IDENTITY_TOL),
            gap: Some(gap),
        }
    }
}

/// Everything one `estimate_all` call produces: the five reports in a fixed
/// order, the naive difference for reference, and the identity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRun {
    pub reports: Vec<AteReport>,
    pub naive_difference: f64,
    pub checks: Vec<IdentityCheck>,
}

impl EstimateRun {
    pub fn report(&self, method: Method) -> &AteReport {
        self.reports.iter().find(|r| r.method == method).expect("all five methods present")
    }
}

/// Fit the configured propensity and outcome backends once, then run all
/// five estimators on the shared inputs.
pub fn estimate_all(ds: &Dataset, config: &EstimateConfig) -> Result<EstimateRun, EstimateError> {
    let covariates: Vec<String> = if config.covariates.is_empty() {
        ds.covariate_names().iter().map(|s| s.to_string()).collect()
    } else {
        config.covariates.clone()
    };
    let index = crate::data::build_strata(ds, &covariates)?;
    let support = check_support(&index);
    if !support.violations.is_empty() && config.support == SupportPolicy::Error {
        return Err(EstimateError::Support(
            support.violations.iter().map(|v| v.label.clone()).collect(),
        ));
    }

    let scores = match &config.propensity {
        PropensityBackend::SampleProportion => {
            propensity::propensity_sample_proportion(&index, config.clip)
        }
        PropensityBackend::Logistic(spec) => {
            propensity::propensity_logistic(ds, spec, config.clip)?
        }
        PropensityBackend::External(values) => {
            PropensityScores::from_external(values.clone(), ds.n(), config.clip)?
        }
    };
    let model = match &config.outcome {
        OutcomeBackend::StratumMean => outcome::fit_stratum_means(ds, &index),
        OutcomeBackend::Logistic(spec) => outcome::fit_outcome_logistic(ds, spec)?,
        OutcomeBackend::External { yhat1, yhat0 } => {
            outcome::external_predictions(yhat1.clone(), yhat0.clone(), ds.n())?
        }
    };
    let preds = outcome::predict_both_arms(&model, ds)?;
    // binning requires K no larger than the number of distinct scores, so
    // clamp the configured K rather than split tied scores into single-arm
    // slivers (with one distinct score this reduces to the naive contrast)
    let mut distinct = scores.per_record().to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    let bins = bin_scores(&scores, ds.treatment(), config.k.min(distinct.len()))?;

    let adjustment = ate_adjustment(&index, config.support)?;
    let iptw = ate_iptw(ds, &scores)?;
    let stratified = ate_stratified(ds, &bins)?;
    let plugin = ate_plugin_predicted(ds, &scores, &preds)?;
    let dr = ate_dr(ds, &scores, &preds)?;
    let naive = naive_difference(ds)?;

    // Which identity hypotheses does this configuration satisfy?
    let clean_support = support.violations.is_empty();
    let sample_prop = scores.provenance == Provenance::SampleProportion;
    // scores are a function of the adjustment strata for the built-in
    // backends; only external vectors can break that
    let stratum_constant_scores = scores.provenance != Provenance::External;
    let bins_internally_constant =
        bins.bins.iter().all(|b| b.score_min == b.score_max);
    let checks = vec![
        IdentityCheck::evaluated(
            "iptw-equals-adjustment",
            sample_prop
                && (clean_support
                    || matches!(config.support, SupportPolicy::ClipPropensity(_))),
            iptw.estimate,
            adjustment.estimate,
        ),
        IdentityCheck::evaluated(
            "stratified-equals-iptw",
            bins_internally_constant,
            stratified.estimate,
            iptw.estimate,
        ),
        IdentityCheck::evaluated(
            "dr-equals-iptw",
            // the correction cancels per stratum only when the predictions
            // are themselves functions of the strata, which external
            // per-record vectors need not be
            sample_prop && !scores.has_clipped() && preds.kind != OutcomeKind::External,
            dr.estimate,
            iptw.estimate,
        ),
        IdentityCheck::evaluated(
            "dr-equals-adjustment",
            preds.kind == OutcomeKind::StratumMean
                && stratum_constant_scores
                && clean_support,
            dr.estimate,
            adjustment.estimate,
        ),
    ];

    Ok(EstimateRun {
        reports: vec![adjustment, iptw, stratified, plugin, dr],
        naive_difference: naive,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_strata, Dataset, OutcomeColumn};
    use crate::fixtures;
    use crate::outcome::{fit_stratum_means, predict_both_arms};
    use crate::propensity::propensity_sample_proportion;

    fn d1_parts() -> (Dataset, StratumIndex, PropensityScores, ArmPredictions) {
        let ds = fixtures::d1();
        let index = build_strata(&ds, &["x".into()]).unwrap();
        let scores = propensity_sample_proportion(&index, ClipBounds::default());
        let model = fit_stratum_means(&ds, &index);
        let preds = predict_both_arms(&model, &ds).unwrap();
        (ds, index, scores, preds)
    }

    fn external_scores(values: Vec<f64>, n: usize) -> PropensityScores {
        PropensityScores::from_external(values, n, ClipBounds::default()).unwrap()
    }

    #[test]
    fn d1_adjustment_is_half() {
        let (_, index, _, _) = d1_parts();
        let r = ate_adjustment(&index, SupportPolicy::Error).unwrap();
        assert_eq!(r.estimate, 0.5);
        assert!(r.diagnostics.support_violations.is_empty());
    }

    #[test]
    fn constant_outcome_adjustment_is_zero() {
        let ds = Dataset::new(
            vec![("x".into(), vec![0, 0, 1, 1])],
            ("z".into(), vec![1, 0, 1, 0]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 1, 1, 1])),
        )
        .unwrap();
        let index = build_strata(&ds, &["x".into()]).unwrap();
        let r = ate_adjustment(&index, SupportPolicy::Error).unwrap();
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn error_policy_names_violating_strata() {
        let ds = Dataset::new(
            vec![("x".into(), vec![0, 0, 0, 0, 1, 1, 1, 1])],
            ("z".into(), vec![1, 1, 0, 0, 1, 1, 1, 1]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 0, 0, 0, 1, 1, 1, 0])),
        )
        .unwrap();
        let index = build_strata(&ds, &["x".into()]).unwrap();
        match ate_adjustment(&index, SupportPolicy::Error) {
            Err(EstimateError::Support(labels)) => assert_eq!(labels, vec!["x=1"]),
            other => panic!("expected support error, got {other:?}"),
        }
    }

    #[test]
    fn drop_policy_renormalizes_and_records_mass() {
        let ds = Dataset::new(
            vec![("x".into(), vec![0, 0, 0, 0, 1, 1, 1, 1])],
            ("z".into(), vec![1, 1, 0, 0, 1, 1, 1, 1]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 0, 0, 0, 1, 1, 1, 0])),
        )
        .unwrap();
        let index = build_strata(&ds, &["x".into()]).unwrap();
        let r = ate_adjustment(&index, SupportPolicy::DropAndRenormalize).unwrap();
        // only x=0 remains: effect 0.5 − 0 with weight renormalized to 1
        assert!((r.estimate - 0.5).abs() < 1e-15);
        assert_eq!(r.diagnostics.dropped_mass, Some(0.5));
        assert_eq!(r.diagnostics.support_violations, vec!["x=1"]);
    }

    #[test]
    fn clip_policy_matches_iptw_on_clipped_scores() {
        let ds = Dataset::new(
            vec![("x".into(), vec![0, 0, 0, 0, 1, 1, 1, 1])],
            ("z".into(), vec![1, 1, 0, 0, 1, 1, 1, 1]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 0, 0, 0, 1, 1, 1, 0])),
        )
        .unwrap();
        let index = build_strata(&ds, &["x".into()]).unwrap();
        let clip = ClipBounds::new(0.05, 0.95).unwrap();
        let adj = ate_adjustment(&index, SupportPolicy::ClipPropensity(clip)).unwrap();
        let scores = propensity_sample_proportion(&index, clip);
        let iptw = ate_iptw(&ds, &scores).unwrap();
        assert!((adj.estimate - iptw.estimate).abs() <= IDENTITY_TOL);
        assert_eq!(adj.diagnostics.clipped_records, vec![4, 5, 6, 7]);
    }

    #[test]
    fn d1_iptw_matches_adjustment() {
        let (ds, index, scores, _) = d1_parts();
        let iptw = ate_iptw(&ds, &scores).unwrap();
        let adj = ate_adjustment(&index, SupportPolicy::Error).unwrap();
        assert!((iptw.estimate - 0.5).abs() <= IDENTITY_TOL);
        assert!((iptw.estimate - adj.estimate).abs() <= IDENTITY_TOL);
    }

    #[test]
    fn randomized_iptw_on_deterministic_outcome() {
        let ds = Dataset::new(
            vec![],
            ("z".into(), vec![1, 0, 1, 0]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 0, 1, 0])),
        )
        .unwrap();
        let scores = external_scores(vec![0.5; 4], 4);
        assert_eq!(ate_iptw(&ds, &scores).unwrap().estimate, 1.0);
    }

    #[test]
    fn d1_iptw_with_wrong_constant_scores() {
        let (ds, _, _, _) = d1_parts();
        let scores = external_scores(vec![0.7; 8], 8);
        let r = ate_iptw(&ds, &scores).unwrap();
        // (1/8)(3/0.7 − 1/0.3), worked by hand
        assert!((r.estimate - (3.0 / 0.7 - 1.0 / 0.3) / 8.0).abs() <= IDENTITY_TOL);
        assert!((r.estimate - 0.5).abs() > 0.3);
    }

    #[test]
    fn degenerate_score_is_rejected() {
        let (ds, _, good, _) = d1_parts();
        let mut per_record = good.per_record().to_vec();
        per_record[3] = 1.0;
        let broken = PropensityScores { per_record, ..good };
        match ate_iptw(&ds, &broken) {
            Err(EstimateError::DegenerateScore { record: 3, score }) => {
                assert_eq!(score, 1.0);
            }
            other => panic!("expected degenerate-score error, got {other:?}"),
        }
    }

    #[test]
    fn stratified_k1_is_naive_difference() {
        let (ds, _, scores, _) = d1_parts();
        let bins = bin_scores(&scores, ds.treatment(), 1).unwrap();
        let r = ate_stratified(&ds, &bins).unwrap();
        let naive = naive_difference(&ds).unwrap();
        assert!((r.estimate - naive).abs() <= IDENTITY_TOL);
    }

    #[test]
    fn d1_stratified_k2_is_half() {
        let (ds, _, scores, _) = d1_parts();
        let bins = bin_scores(&scores, ds.treatment(), 2).unwrap();
        let r = ate_stratified(&ds, &bins).unwrap();
        assert!((r.estimate - 0.5).abs() <= IDENTITY_TOL);
        assert_eq!(r.inputs.k, Some(2));
    }

    #[test]
    fn single_arm_bin_is_named() {
        // bins of two by record order: bin 1 holds two treated records
        let ds = Dataset::new(
            vec![],
            ("z".into(), vec![1, 1, 0, 0]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 0, 1, 0])),
        )
        .unwrap();
        let scores = external_scores(vec![0.5; 4], 4);
        let bins = bin_scores(&scores, ds.treatment(), 2).unwrap();
        match ate_stratified(&ds, &bins) {
            Err(EstimateError::SingleArmBin { bin: 1, arm: "control" }) => {}
            other => panic!("expected single-arm bin error, got {other:?}"),
        }
    }

    #[test]
    fn plugin_with_observed_y_is_exactly_iptw() {
        let (ds, _, scores, _) = d1_parts();
        let y: Vec<f64> = (0..8).map(|i| ds.outcome_value(i)).collect();
        let preds = ArmPredictions {
            yhat1: y.clone(),
            yhat0: y,
            kind: OutcomeKind::External,
            covariates: Vec::new(),
            fallback_cells_used: Vec::new(),
        };
        let plugin = ate_plugin_predicted(&ds, &scores, &preds).unwrap();
        let iptw = ate_iptw(&ds, &scores).unwrap();
        assert_eq!(plugin.estimate, iptw.estimate);
    }

    #[test]
    fn plugin_constant_predictions_vanish() {
        let (ds, _, scores, _) = d1_parts();
        let preds = ArmPredictions {
            yhat1: vec![0.37; 8],
            yhat0: vec![0.37; 8],
            kind: OutcomeKind::External,
            covariates: Vec::new(),
            fallback_cells_used: Vec::new(),
        };
        let r = ate_plugin_predicted(&ds, &scores, &preds).unwrap();
        assert!(r.estimate.abs() <= IDENTITY_TOL);
    }

    #[test]
    fn d1_plugin_with_stratum_means_is_half() {
        let (ds, _, scores, preds) = d1_parts();
        let r = ate_plugin_predicted(&ds, &scores, &preds).unwrap();
        assert!((r.estimate - 0.5).abs() <= IDENTITY_TOL);
    }

    #[test]
    fn correction_vanishes_under_sample_proportions() {
        let (ds, _, scores, preds) = d1_parts();
        let c = correction_term(&ds, &scores, &preds).unwrap();
        assert!(c.abs() <= IDENTITY_TOL);
    }

    #[test]
    fn correction_under_wrong_scores_is_nonzero_and_consistent() {
        let (ds, _, _, preds) = d1_parts();
        let scores = external_scores(vec![0.7; 8], 8);
        let c = correction_term(&ds, &scores, &preds).unwrap();
        assert!(c.abs() > 0.1);
        // the two-form agreement is enforced inside; a second call is stable
        let again = correction_term(&ds, &scores, &preds).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn d1_dr_equals_iptw_under_sample_proportions() {
        let (ds, _, scores, _) = d1_parts();
        // deliberately wrong predictions: DR must still match IPTW
        let preds = ArmPredictions {
            yhat1: vec![0.9; 8],
            yhat0: vec![0.1; 8],
            kind: OutcomeKind::External,
            covariates: Vec::new(),
            fallback_cells_used: Vec::new(),
        };
        let dr = ate_dr(&ds, &scores, &preds).unwrap();
        let iptw = ate_iptw(&ds, &scores).unwrap();
        assert!((dr.estimate - iptw.estimate).abs() <= IDENTITY_TOL);
        assert!((dr.estimate - 0.5).abs() <= IDENTITY_TOL);
        assert_eq!(dr.diagnostics.propensity_leg, Some(true));
        assert_eq!(dr.diagnostics.outcome_leg, Some(false));
    }

    #[test]
    fn d1_dr_survives_wrong_constant_scores() {
        let (ds, _, _, preds) = d1_parts();
        let scores = external_scores(vec![0.7; 8], 8);
        let dr = ate_dr(&ds, &scores, &preds).unwrap();
        assert!((dr.estimate - 0.5).abs() <= IDENTITY_TOL);
        assert_eq!(dr.diagnostics.propensity_leg, Some(false));
        assert_eq!(dr.diagnostics.outcome_leg, Some(true));
    }

    #[test]
    fn constant_outcome_dr_is_zero_for_any_scores() {
        let ds = Dataset::new(
            vec![("x".into(), vec![0, 1, 0, 1, 0, 1])],
            ("z".into(), vec![1, 0, 0, 1, 1, 0]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 1, 1, 1, 1, 1])),
        )
        .unwrap();
        let index = build_strata(&ds, &["x".into()]).unwrap();
        let model = fit_stratum_means(&ds, &index);
        let preds = predict_both_arms(&model, &ds).unwrap();
        let scores = external_scores(vec![0.81, 0.2, 0.33, 0.6, 0.5, 0.9], 6);
        let dr = ate_dr(&ds, &scores, &preds).unwrap();
        assert!(dr.estimate.abs() <= IDENTITY_TOL);
    }

    #[test]
    fn estimate_all_d1_defaults() {
        let ds = fixtures::d1();
        let config = EstimateConfig { k: 2, ..EstimateConfig::default() };
        let run = estimate_all(&ds, &config).unwrap();
        assert_eq!(run.reports.len(), 5);
        for r in &run.reports {
            assert!((r.estimate - 0.5).abs() <= IDENTITY_TOL, "{:?}", r.method);
        }
        assert!((run.naive_difference - 0.5).abs() <= IDENTITY_TOL);
        for c in &run.checks {
            assert!(c.applicable, "{}", c.name);
            assert_eq!(c.holds, Some(true), "{}", c.name);
        }
    }

    #[test]
    fn estimate_all_flags_inapplicable_identities() {
        let ds = fixtures::d1();
        let config = EstimateConfig {
            k: 2,
            propensity: PropensityBackend::External(vec![0.7; 8]),
            ..EstimateConfig::default()
        };
        let run = estimate_all(&ds, &config).unwrap();
        let by_name = |n: &str| run.checks.iter().find(|c| c.name == n).unwrap();
        assert!(!by_name("iptw-equals-adjustment").applicable);
        assert!(!by_name("dr-equals-iptw").applicable);
        assert!(!by_name("dr-equals-adjustment").applicable);
        // constant external scores still leave every bin internally constant
        assert!(by_name("stratified-equals-iptw").applicable);
    }

    #[test]
    fn estimate_all_errors_on_violated_support_by_default() {
        let ds = Dataset::new(
            vec![("x".into(), vec![0, 0, 1, 1])],
            ("z".into(), vec![1, 0, 1, 1]),
            ("y".into(), OutcomeColumn::Binary(vec![1, 0, 1, 0])),
        )
        .unwrap();
        assert!(matches!(
            estimate_all(&ds, &EstimateConfig { k: 1, ..EstimateConfig::default() }),
            Err(EstimateError::Support(_))
        ));
    }

    #[test]
    fn reports_serialize_round_trip() {
        let (ds, _, scores, preds) = d1_parts();
        let dr = ate_dr(&ds, &scores, &preds).unwrap();
        let json = serde_json::to_string(&dr).unwrap();
        let back: AteReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, dr);
    }
}
