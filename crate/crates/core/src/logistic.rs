//! Logistic regression fitted by iteratively reweighted least squares.
//!
//! The solver is deliberately plain: zero initialization, full Newton steps
//! with step-halving so the log-likelihood never decreases, a fixed stopping
//! rule (max coefficient change below 1e-10, at most 100 iterations), and a
//! pivoted Cholesky factorization that names collinear columns instead of
//! limping through a singular system. Complete separation is not an error;
//! it is detected from the coefficient scale and reported on the fit.

use crate::data::Dataset;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Convergence threshold on the largest absolute coefficient change.
pub const IRLS_TOL: f64 = 1e-10;
/// Iteration cap; hitting it reports non-convergence.
pub const IRLS_MAX_ITER: usize = 100;
/// Any coefficient beyond this magnitude flags (near-)complete separation.
pub const SEPARATION_BOUND: f64 = 30.0;
/// Relative pivot threshold for declaring the design rank deficient.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LogisticError {
    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("design matrix has no rows or no columns")]
    EmptyDesign,
    #[error("response length {response} does not match design rows {rows}")]
    LengthMismatch { response: usize, rows: usize },
    #[error("unknown feature column `{0}`")]
    UnknownColumn(String),
}

/// How covariates enter the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// One indicator per observed configuration, no intercept. The MLE then
    /// reproduces per-cell sample proportions.
    Saturated,
    /// Intercept plus one dummy per non-baseline level of each column, and
    /// optionally all pairwise products of those dummies.
    OneHot { interactions: bool },
}

/// Which covariate columns feed the design, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub columns: Vec<String>,
    pub encoding: Encoding,
}

impl FeatureSpec {
    pub fn one_hot(columns: &[String]) -> Self {
        FeatureSpec { columns: columns.to_vec(), encoding: Encoding::OneHot { interactions: false } }
    }

    pub fn saturated(columns: &[String]) -> Self {
        FeatureSpec { columns: columns.to_vec(), encoding: Encoding::Saturated }
    }
}

/// Row-major dense design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub n: usize,
    pub p: usize,
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }
}

/// The feature map frozen at fit time, so the same encoding can be applied
/// to new (treatment, covariate) configurations at prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRecipe {
    pub columns: Vec<String>,
    pub encoding: Encoding,
    pub with_treatment: bool,
    /// One-hot: number of levels per column seen at fit time.
    levels: Vec<usize>,
    /// Saturated: observed configurations (treatment code first when
    /// present) mapped to their indicator column.
    configs: BTreeMap<Vec<usize>, usize>,
}

impl DesignRecipe {
    /// Build the recipe and the fit-time design in one pass. When
    /// `with_treatment` is set the treatment column becomes part of the
    /// feature map (a plain regressor under one-hot, part of the cell key
    /// under saturated encoding).
    pub fn from_dataset(
        ds: &Dataset,
        spec: &FeatureSpec,
        with_treatment: bool,
    ) -> Result<(DesignRecipe, DesignMatrix), LogisticError> {
        let cols: Vec<&[usize]> = spec
            .columns
            .iter()
            .map(|c| ds.covariate(c).ok_or_else(|| LogisticError::UnknownColumn(c.clone())))
            .collect::<Result<_, _>>()?;
        let n = ds.n();
        let mut recipe = DesignRecipe {
            columns: spec.columns.clone(),
            encoding: spec.encoding.clone(),
            with_treatment,
            levels: Vec::new(),
            configs: BTreeMap::new(),
        };
        match spec.encoding {
            Encoding::Saturated => {
                for i in 0..n {
                    let key = recipe.config_key(
                        with_treatment.then(|| ds.treatment()[i]),
                        &cols.iter().map(|c| c[i]).collect::<Vec<_>>(),
                    );
                    let next = recipe.configs.len();
                    recipe.configs.entry(key).or_insert(next);
                }
                // re-number in key order so column layout is deterministic
                let keys: Vec<Vec<usize>> = recipe.configs.keys().cloned().collect();
                recipe.configs =
                    keys.into_iter().enumerate().map(|(j, k)| (k, j)).collect();
            }
            Encoding::OneHot { .. } => {
                recipe.levels =
                    cols.iter().map(|c| c.iter().copied().max().unwrap_or(0) + 1).collect();
            }
        }
        let names = recipe.feature_names();
        let p = names.len();
        if n == 0 || p == 0 {
            return Err(LogisticError::EmptyDesign);
        }
        let mut values = Vec::with_capacity(n * p);
        for i in 0..n {
            let covs: Vec<usize> = cols.iter().map(|c| c[i]).collect();
            let (row, _) = recipe.feature_row(with_treatment.then(|| ds.treatment()[i]), &covs);
            values.extend_from_slice(&row);
        }
        Ok((recipe, DesignMatrix { n, p, values, names }))
    }

    fn config_key(&self, treatment: Option<u8>, covs: &[usize]) -> Vec<usize> {
        let mut key = Vec::with_capacity(covs.len() + 1);
        if let Some(z) = treatment {
            key.push(z as usize);
        }
        key.extend_from_slice(covs);
        key
    }

    pub fn feature_names(&self) -> Vec<String> {
        match &self.encoding {
            Encoding::Saturated => self
                .configs
                .keys()
                .map(|key| {
                    let mut parts = Vec::new();
                    let mut vals = key.iter();
                    if self.with_treatment {
                        parts.push(format!("z={}", vals.next().unwrap()));
                    }
                    for (c, v) in self.columns.iter().zip(vals) {
                        parts.push(format!("{c}={v}"));
                    }
                    format!("cell[{}]", parts.join(","))
                })
                .collect(),
            Encoding::OneHot { interactions } => {
                let mut names = vec!["intercept".to_string()];
                if self.with_treatment {
                    names.push("z".to_string());
                }
                let mut dummy_names = Vec::new();
                for (c, &levels) in self.columns.iter().zip(&self.levels) {
                    for l in 1..levels {
                        dummy_names.push(format!("{c}={l}"));
                    }
                }
                names.extend(dummy_names.iter().cloned());
                if *interactions {
                    for a in 0..self.columns.len() {
                        for b in (a + 1)..self.columns.len() {
                            for la in 1..self.levels[a] {
                                for lb in 1..self.levels[b] {
                                    names.push(format!(
                                        "{}={la}*{}={lb}",
                                        self.columns[a], self.columns[b]
                                    ));
                                }
                            }
                        }
                    }
                }
                names
            }
        }
    }

    /// Encode one configuration. The flag is false when the configuration
    /// was never seen at fit time (unseen saturated cell or unseen one-hot
    /// level), in which case the row falls back to the baseline encoding.
    pub fn feature_row(&self, treatment: Option<u8>, covs: &[usize]) -> (Vec<f64>, bool) {
        match &self.encoding {
            Encoding::Saturated => {
                let mut row = vec![0.0; self.configs.len()];
                let key = self.config_key(treatment, covs);
                match self.configs.get(&key) {
                    Some(&j) => {
                        row[j] = 1.0;
                        (row, true)
                    }
                    None => (row, false),
                }
            }
            Encoding::OneHot { interactions } => {
                let mut seen = true;
                let mut row = vec![1.0];
                if let Some(z) = treatment {
                    row.push(z as f64);
                }
                let mut dummies = Vec::new();
                for (k, &levels) in self.levels.iter().enumerate() {
                    let v = covs[k];
                    if v >= levels {
                        seen = false;
                    }
                    for l in 1..levels {
                        dummies.push(if v == l { 1.0 } else { 0.0 });
                    }
                }
                row.extend_from_slice(&dummies);
                if *interactions {
                    let mut offsets = Vec::new();
                    let mut at = 0;
                    for &levels in &self.levels {
                        offsets.push(at);
                        at += levels.saturating_sub(1);
                    }
                    for a in 0..self.levels.len() {
                        for b in (a + 1)..self.levels.len() {
                            for la in 1..self.levels[a] {
                                for lb in 1..self.levels[b] {
                                    let da = dummies[offsets[a] + la - 1];
                                    let db = dummies[offsets[b] + lb - 1];
                                    row.push(da * db);
                                }
                            }
                        }
                    }
                }
                (row, seen)
            }
        }
    }
}

/// A fitted logistic model with its convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    pub separation: bool,
    pub final_grad_norm: f64,
    pub loglik_history: Vec<f64>,
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

pub fn log_likelihood(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..x.n {
        let eta: f64 = x.row(i).iter().zip(beta).map(|(v, b)| v * b).sum();
        ll += y[i] * eta - softplus(eta);
    }
    ll
}

/// Score vector `X^T (y - mu)`.
pub fn gradient(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.p];
    for i in 0..x.n {
        let row = x.row(i);
        let eta: f64 = row.iter().zip(beta).map(|(v, b)| v * b).sum();
        let r = y[i] - sigmoid(eta);
        for (gj, v) in g.iter_mut().zip(row) {
            *gj += r * v;
        }
    }
    g
}

pub fn predict_proba(x: &DesignMatrix, beta: &[f64]) -> Vec<f64> {
    (0..x.n)
        .map(|i| sigmoid(x.row(i).iter().zip(beta).map(|(v, b)| v * b).sum()))
        .collect()
}

/// Pivoted Cholesky solve of `A d = g` for symmetric positive semidefinite
/// `A`. Pivots falling below `RANK_TOL` times the largest initial diagonal
/// abort with the unfactored column indices.
fn solve_spd(a: &[f64], g: &[f64], p: usize) -> Result<Vec<f64>, Vec<usize>> {
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let max_diag = (0..p).map(|j| m[j * p + j]).fold(0.0_f64, f64::max);
    let tol = RANK_TOL * max_diag.max(f64::MIN_POSITIVE);
    for k in 0..p {
        let (jmax, dmax) = (k..p)
            .map(|j| (j, m[j * p + j]))
            .fold((k, f64::NEG_INFINITY), |acc, it| if it.1 > acc.1 { it } else { acc });
        if dmax <= tol {
            return Err(perm[k..].to_vec());
        }
        if jmax != k {
            perm.swap(k, jmax);
            for c in 0..p {
                m.swap(k * p + c, jmax * p + c);
            }
            for r in 0..p {
                m.swap(r * p + k, r * p + jmax);
            }
        }
        let d = m[k * p + k].sqrt();
        m[k * p + k] = d;
        for i in (k + 1)..p {
            m[i * p + k] /= d;
        }
        // keep the active block symmetric in both triangles: the pivot swap
        // above moves whole rows/columns, so stale mirror entries would
        // otherwise be swapped into play
        for i in (k + 1)..p {
            let lik = m[i * p + k];
            for j in (k + 1)..=i {
                let v = lik * m[j * p + k];
                m[i * p + j] -= v;
                if j != i {
                    m[j * p + i] -= v;
                }
            }
        }
    }
    // forward/back substitution on the permuted system
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = g[perm[i]];
        for j in 0..i {
            s -= m[i * p + j] * y[j];
        }
        y[i] = s / m[i * p + i];
    }
    let mut xp = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for j in (i + 1)..p {
            s -= m[j * p + i] * xp[j];
        }
        xp[i] = s / m[i * p + i];
    }
    let mut out = vec![0.0; p];
    for i in 0..p {
        out[perm[i]] = xp[i];
    }
    Ok(out)
}

/// Fit by IRLS from a zero start. The returned history of log-likelihood
/// values is non-decreasing by construction (step-halving).
pub fn fit_irls(x: &DesignMatrix, y: &[f64]) -> Result<LogisticFit, LogisticError> {
    if x.n == 0 || x.p == 0 {
        return Err(LogisticError::EmptyDesign);
    }
    if y.len() != x.n {
        return Err(LogisticError::LengthMismatch { response: y.len(), rows: x.n });
    }
    let p = x.p;
    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(x, y, &beta);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=IRLS_MAX_ITER {
        // assemble gradient and X^T W X at the current beta
        let mut g = vec![0.0; p];
        let mut a = vec![0.0; p * p];
        for i in 0..x.n {
            let row = x.row(i);
            let eta: f64 = row.iter().zip(&beta).map(|(v, b)| v * b).sum();
            let mu = sigmoid(eta);
            let w = mu * (1.0 - mu);
            let r = y[i] - mu;
            for j in 0..p {
                g[j] += r * row[j];
                let wj = w * row[j];
                for k in 0..=j {
                    a[j * p + k] += wj * row[k];
                }
            }
        }
        for j in 0..p {
            for k in (j + 1)..p {
                a[j * p + k] = a[k * p + j];
            }
        }
        let delta = match solve_spd(&a, &g, p) {
            Ok(d) => d,
            Err(cols) if iter == 1 => {
                return Err(LogisticError::RankDeficient {
                    columns: cols.into_iter().map(|c| x.names[c].clone()).collect(),
                })
            }
            // curvature collapsed mid-fit (diverging coefficients): stop and
            // let the separation check describe what happened
            Err(_) => break,
        };
        let mut step = 1.0;
        let mut accepted = None;
        // near the optimum the objective goes floating-point flat while the
        // coefficients still move; tolerate that much decrease so the step
        // tolerance below, not summation noise, decides convergence
        let flat = 1e-12 * (1.0 + ll.abs());
        for _ in 0..40 {
            let candidate: Vec<f64> =
                beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
            let ll_new = log_likelihood(x, y, &candidate);
            if ll_new.is_finite() && ll_new >= ll - flat {
                accepted = Some((candidate, ll_new, step));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, ll_new, step)) = accepted else { break };
        let max_change = delta.iter().map(|d| (d * step).abs()).fold(0.0, f64::max);
        beta = candidate;
        ll = ll_new;
        history.push(ll);
        iterations = iter;
        if max_change < IRLS_TOL {
            converged = true;
            break;
        }
    }
    let separation = beta.iter().any(|b| b.abs() > SEPARATION_BOUND);
    let grad = gradient(x, y, &beta);
    let final_grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(LogisticFit {
        coefficients: beta,
        feature_names: x.names.clone(),
        converged,
        iterations,
        separation,
        final_grad_norm,
        loglik_history: history,
    })
}
