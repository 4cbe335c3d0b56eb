//! Causal effect estimation on discrete Bayesian networks.
//!
//! The crate is organised around a small pipeline: a [`model::CausalModel`]
//! gives exact interventional answers by enumeration, [`data`] turns CSV
//! records into strata and fitted CPTs, [`propensity`] and [`outcome`]
//! produce the nuisance inputs, and [`estimators`] computes the average
//! treatment effect five ways (adjustment, inverse probability weighting,
//! propensity stratification, plug-in prediction, doubly robust) with the
//! algebraic identities between them surfaced as diagnostics. [`simulate`]
//! draws seeded datasets with per-record potential outcomes for end-to-end
//! checks against ground truth.

pub mod data;
pub mod estimators;
pub mod fixtures;
pub mod logistic;
pub mod model;
pub mod outcome;
pub mod propensity;
pub mod simulate;

pub use data::{Dataset, StratumIndex, SupportReport};
pub use estimators::{AteReport, EstimateConfig, EstimateRun, SupportPolicy};
pub use model::{CausalGraph, CausalModel, InterventionQuery, ModelSpec};
pub use propensity::{PropensityScores, ScoreBins};
