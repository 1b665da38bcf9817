//! Propensity-score models: maximum-likelihood logistic regression and
//! gradient-boosted regression trees with balance-based iteration selection.

pub mod gbm;
pub mod logistic;

use nalgebra::DMatrix;

use crate::error::Result;

pub use gbm::{fit_gbm, select_iteration, GbmParams, TreeEnsemble};
pub use logistic::{fit_logistic, LogitModel, LogitOptions};

/// Fitted probabilities are clamped to `[PS_CLAMP, 1 − PS_CLAMP]`.
pub const PS_CLAMP: f64 = 1e-6;

pub fn clamp_ps(p: f64) -> f64 {
    p.clamp(PS_CLAMP, 1.0 - PS_CLAMP)
}

/// Anything that yields P(T = 1 | X) for the rows of a feature matrix.
pub trait PropensityModel {
    fn predict_ps(&self, x: &DMatrix<f64>) -> Result<Vec<f64>>;
}
