use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expit, log1p_exp, logit, solve_spd, sup_norm, weighted_gram, with_intercept};
use crate::propensity::{clamp_ps, PropensityModel};
use crate::types::group_sizes;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogitOptions {
    /// Convergence threshold on the sup-norm of the score `Σ (Tᵢ − pᵢ) dᵢ`.
    pub tol: f64,
    pub max_iter: usize,
    /// Coefficient norm beyond which the fit is declared separated.
    pub separation_norm: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions { tol: 1e-8, max_iter: 100, separation_norm: 1e3 }
    }
}

/// Fitted probabilities closer than this to the observed label signal
/// (quasi-)separation.
const SEPARATION_RESIDUAL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LogitModel {
    /// Intercept first, then one coefficient per design column.
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_abs_score: f64,
    pub separation: bool,
}

fn log_likelihood(eta: &DVector<f64>, t: &[bool]) -> f64 {
    eta.iter().zip(t).map(|(&e, &ti)| if ti { e } else { 0.0 } - log1p_exp(e)).sum()
}

fn score(xa: &DMatrix<f64>, p: &[f64], t: &[bool]) -> DVector<f64> {
    let resid = DVector::from_iterator(t.len(), t.iter().zip(p).map(|(&ti, &pi)| f64::from(u8::from(ti)) - pi));
    xa.transpose() * resid
}

/// Newton–Raphson (IRLS) maximum likelihood with step halving. The design
/// excludes the intercept, which is added here.
pub fn fit_logistic(x: &DMatrix<f64>, t: &[bool], opts: &LogitOptions) -> Result<LogitModel> {
    if t.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: t.len() });
    }
    let (n_t, _) = group_sizes(t)?;
    let xa = with_intercept(x);
    let mut beta = DVector::zeros(xa.ncols());
    beta[0] = logit(n_t as f64 / t.len() as f64);

    let mut eta = &xa * &beta;
    let mut ll = log_likelihood(&eta, t);
    let mut converged = false;
    let mut iterations = 0;
    let mut max_abs_score = f64::INFINITY;

    while iterations <= opts.max_iter {
        let p: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let g = score(&xa, &p, t);
        max_abs_score = sup_norm(g.as_slice());
        if max_abs_score < opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter || beta.norm() > opts.separation_norm {
            break;
        }
        iterations += 1;

        let curvature: Vec<f64> = p.iter().map(|&pi| pi * (1.0 - pi)).collect();
        let h = weighted_gram(&xa, &curvature);
        let Some(step) = solve_spd(&h, &g, 1e-10) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &beta + &step * scale;
            let eta_c = &xa * &candidate;
            let ll_c = log_likelihood(&eta_c, t);
            if ll_c >= ll - 1e-12 * ll.abs() {
                beta = candidate;
                eta = eta_c;
                ll = ll_c;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let perfectly_fitted = eta
        .iter()
        .zip(t)
        .any(|(&e, &ti)| (f64::from(u8::from(ti)) - expit(e)).abs() < SEPARATION_RESIDUAL);
    let separation = beta.norm() > opts.separation_norm || perfectly_fitted;
    Ok(LogitModel {
        beta: beta.as_slice().to_vec(),
        converged: converged && !separation,
        iterations,
        max_abs_score,
        separation,
    })
}

impl LogitModel {
    /// Linear predictor `β₀ + dᵀβ` for each row.
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() + 1 != self.beta.len() {
            return Err(Error::DimensionMismatch { expected: self.beta.len() - 1, found: x.ncols() });
        }
        Ok(x.row_iter()
            .map(|row| self.beta[0] + row.iter().zip(&self.beta[1..]).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}

impl PropensityModel for LogitModel {
    fn predict_ps(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.linear_predictor(x)?.into_iter().map(|e| clamp_ps(expit(e))).collect())
    }
}
