//! Entropy balancing.
//!
//! Minimises `Σ wᵢ log(wᵢ / qᵢ)` over the reweighted group subject to
//! `Σ wᵢ = 1` and `Σ wᵢ cⱼ(Xᵢ) = targetⱼ`. The dual is unconstrained and
//! smooth: with `wᵢ(Z) ∝ qᵢ exp(cᵢᵀZ)`,
//!
//! ```text
//! L(Z) = log Σᵢ qᵢ exp((cᵢ − target)ᵀ Z)
//! ∇L   = Σᵢ wᵢ cᵢ − target
//! ∇²L  = Σᵢ wᵢ (cᵢ − c̄_w)(cᵢ − c̄_w)ᵀ
//! ```
//!
//! and is minimised by damped Newton iterations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd, sup_norm, weighted_col_sums, weighted_gram};
use crate::types::{group_sizes, Estimand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EbOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Dual norm beyond which the target is declared infeasible.
    pub max_dual_norm: f64,
    pub max_halvings: usize,
    pub ridge: f64,
}

impl Default for EbOptions {
    fn default() -> Self {
        EbOptions { tol: 1e-8, max_iter: 200, max_dual_norm: 1e6, max_halvings: 50, ridge: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbSolution {
    /// Dual multipliers Z, one per constraint column.
    pub lambda: Vec<f64>,
    /// Weights of the reweighted units; positive and summing to one.
    pub weights: Vec<f64>,
    /// `max_j |Σ wᵢ cᵢⱼ − targetⱼ|`.
    pub max_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Treated-group means (ATT) or full-sample means (ATE) of each column.
pub fn eb_targets(d: &DMatrix<f64>, t: &[bool], estimand: Estimand) -> Result<Vec<f64>> {
    if t.len() != d.nrows() {
        return Err(Error::DimensionMismatch { expected: d.nrows(), found: t.len() });
    }
    let (n_t, _) = group_sizes(t)?;
    Ok(match estimand {
        Estimand::Att => {
            let mask: Vec<f64> = t.iter().map(|&ti| f64::from(u8::from(ti)) / n_t as f64).collect();
            weighted_col_sums(d, &mask).as_slice().to_vec()
        }
        Estimand::Ate => d.row_mean().iter().copied().collect(),
    })
}

/// Centered constraint matrix and log base weights.
struct Problem {
    centered: DMatrix<f64>,
    log_base: Vec<f64>,
}

impl Problem {
    fn new(c: &DMatrix<f64>, targets: &[f64], base: Option<&[f64]>) -> Result<Self> {
        if targets.len() != c.ncols() {
            return Err(Error::DimensionMismatch { expected: c.ncols(), found: targets.len() });
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InfeasibleTarget("targets must be finite".into()));
        }
        let log_base = match base {
            None => vec![0.0; c.nrows()],
            Some(q) => {
                if q.len() != c.nrows() {
                    return Err(Error::DimensionMismatch { expected: c.nrows(), found: q.len() });
                }
                if q.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::Config("base weights must be positive and finite".into()));
                }
                q.iter().map(|v| v.ln()).collect()
            }
        };
        let mut centered = c.clone();
        for (mut col, &tj) in centered.column_iter_mut().zip(targets) {
            col.add_scalar_mut(-tj);
        }
        Ok(Problem { centered, log_base })
    }

    /// Normalized weights and the dual objective at `z`.
    fn weights(&self, z: &DVector<f64>) -> (Vec<f64>, f64) {
        let eta: Vec<f64> = (&self.centered * z).iter().zip(&self.log_base).map(|(a, b)| a + b).collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        let objective = shift + total.ln() - log_sum_exp(&self.log_base);
        (unnorm.into_iter().map(|u| u / total).collect(), objective)
    }

    fn gradient(&self, w: &[f64]) -> DVector<f64> {
        weighted_col_sums(&self.centered, w)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Dual objective `L(Z)` (base weights normalized to sum to one).
pub fn dual_objective(c: &DMatrix<f64>, targets: &[f64], base: Option<&[f64]>, z: &[f64]) -> Result<f64> {
    let p = Problem::new(c, targets, base)?;
    Ok(p.weights(&DVector::from_column_slice(z)).1)
}

/// Analytic dual gradient `Σ wᵢ(Z) cᵢ − target`.
pub fn dual_gradient(c: &DMatrix<f64>, targets: &[f64], base: Option<&[f64]>, z: &[f64]) -> Result<Vec<f64>> {
    let p = Problem::new(c, targets, base)?;
    let (w, _) = p.weights(&DVector::from_column_slice(z));
    Ok(p.gradient(&w).as_slice().to_vec())
}

/// Solves the entropy balancing problem for the rows of `c` (the units
/// being reweighted). `base` defaults to uniform.
pub fn solve_entropy_balance(c: &DMatrix<f64>, targets: &[f64], base: Option<&[f64]>, opts: &EbOptions) -> Result<EbSolution> {
    let (n, k) = c.shape();
    if k >= n {
        return Err(Error::Estimation(format!("{k} balance constraints need more than {n} reweighted units")));
    }
    let problem = Problem::new(c, targets, base)?;
    for (j, col) in problem.centered.column_iter().enumerate() {
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let constant_at_target = lo == 0.0 && hi == 0.0;
        if !constant_at_target && (lo >= 0.0 || hi <= 0.0) {
            return Err(Error::InfeasibleTarget(format!(
                "target for column {j} lies outside the range of the reweighted units"
            )));
        }
    }

    let mut z = DVector::zeros(k);
    let (mut w, mut objective) = problem.weights(&z);
    let mut grad = problem.gradient(&w);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        if sup_norm(grad.as_slice()) < opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        iterations += 1;

        let mean = grad.clone();
        let mut hess = weighted_gram(&problem.centered, &w);
        hess -= &mean * mean.transpose();
        let step = solve_spd(&hess, &(-&grad), opts.ridge)
            .ok_or_else(|| Error::Singular("entropy balancing Hessian is singular after ridge".into()))?;
        let slope = grad.dot(&step);
        let grad_norm = sup_norm(grad.as_slice());

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let candidate = &z + &step * scale;
            let (w_c, obj_c) = problem.weights(&candidate);
            let grad_c = problem.gradient(&w_c);
            let armijo = obj_c <= objective + 1e-4 * scale * slope;
            if obj_c.is_finite() && (armijo || sup_norm(grad_c.as_slice()) < grad_norm) {
                z = candidate;
                w = w_c;
                objective = obj_c;
                grad = grad_c;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::InfeasibleTarget(format!(
                "no improving step after {} halvings",
                opts.max_halvings
            )));
        }
        if z.norm() > opts.max_dual_norm {
            return Err(Error::InfeasibleTarget(format!("dual norm exceeded {:e}", opts.max_dual_norm)));
        }
    }

    let max_violation = sup_norm(problem.gradient(&w).as_slice());
    Ok(EbSolution {
        lambda: z.as_slice().to_vec(),
        weights: w,
        max_violation,
        iterations,
        converged,
    })
}

/// Per-unit weights for the whole sample, normalized within each group.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceWeights {
    pub weights: Vec<f64>,
    pub converged: bool,
    /// Largest violation over the reweighted groups.
    pub max_violation: f64,
    pub iterations: usize,
}

/// ATT: controls balanced to treated means, treated uniform. ATE: each group
/// balanced to full-sample means.
pub fn entropy_balance_weights(d: &DMatrix<f64>, t: &[bool], estimand: Estimand, opts: &EbOptions) -> Result<BalanceWeights> {
    let targets = eb_targets(d, t, estimand)?;
    let (n_t, _) = group_sizes(t)?;
    let groups: &[bool] = match estimand {
        Estimand::Att => &[false],
        Estimand::Ate => &[true, false],
    };
    let mut weights: Vec<f64> = t.iter().map(|&ti| if ti { 1.0 / n_t as f64 } else { 0.0 }).collect();
    let mut out = BalanceWeights { weights: Vec::new(), converged: true, max_violation: 0.0, iterations: 0 };
    for &group in groups {
        let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] == group).collect();
        let sol = solve_entropy_balance(&d.select_rows(&idx), &targets, None, opts)?;
        for (&i, &wi) in idx.iter().zip(&sol.weights) {
            weights[i] = wi;
        }
        out.converged &= sol.converged;
        out.max_violation = out.max_violation.max(sol.max_violation);
        out.iterations += sol.iterations;
    }
    out.weights = weights;
    Ok(out)
}
