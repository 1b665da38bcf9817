//! Covariate balancing propensity score.
//!
//! A logistic propensity model `π = expit(dᵀβ)` is fitted by GMM on
//! moment conditions that include covariate balance. The over-identified
//! ("default") mode stacks the likelihood score with the balance conditions
//! and uses two-step GMM; the just-identified ("exact") mode solves the
//! balance conditions alone.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expit, inverse_spd_ridged, logit, solve_spd, sup_norm, weighted_gram, with_intercept};
use crate::propensity::{clamp_ps, fit_logistic, LogitOptions, PropensityModel, PS_CLAMP};
use crate::seed::SimRng;
use crate::types::{group_sizes, Estimand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CbpsMode {
    /// Score and balance conditions, two-step GMM.
    OverIdentified,
    /// Balance conditions only.
    JustIdentified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbpsOptions {
    /// Balance residual below which a just-identified fit counts as converged.
    pub balance_tol: f64,
    /// Gradient sup-norm target for the GMM objective.
    pub gradient_tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    /// Added to the moment covariance before inversion.
    pub ridge: f64,
    /// Seeds the restart perturbations; set per fit by the harness.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CbpsOptions {
    fn default() -> Self {
        CbpsOptions {
            balance_tol: 1e-6,
            gradient_tol: 1e-10,
            max_iter: 500,
            restarts: 20,
            ridge: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbpsModel {
    /// Intercept first.
    pub beta: Vec<f64>,
    pub mode: CbpsMode,
    pub estimand: Estimand,
    pub gmm_objective: f64,
    /// Sup-norm of the balance block at `beta`.
    pub balance_residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PropensityModel for CbpsModel {
    fn predict_ps(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() + 1 != self.beta.len() {
            return Err(Error::DimensionMismatch { expected: self.beta.len() - 1, found: x.ncols() });
        }
        Ok(x.row_iter()
            .map(|r| clamp_ps(expit(self.beta[0] + r.iter().zip(&self.beta[1..]).map(|(a, b)| a * b).sum::<f64>())))
            .collect())
    }
}

/// Per-unit building blocks of the moment conditions at one β.
struct MomentTerms {
    /// Multiplier of dᵢ in the score contribution.
    score: Vec<f64>,
    /// Multiplier of dᵢ in the balance contribution, scaled so that the
    /// plain mean over all n units is the balance condition.
    balance: Vec<f64>,
    /// d(score multiplier)/dη.
    score_slope: Vec<f64>,
    /// d(balance multiplier)/dη.
    balance_slope: Vec<f64>,
    /// Second derivatives in η.
    score_curv: Vec<f64>,
    balance_curv: Vec<f64>,
}

fn moment_terms(xa: &DMatrix<f64>, beta: &DVector<f64>, t: &[bool], estimand: Estimand) -> MomentTerms {
    let n = t.len() as f64;
    let n_t = t.iter().filter(|&&b| b).count() as f64;
    let eta = xa * beta;
    let mut m = MomentTerms {
        score: Vec::with_capacity(t.len()),
        balance: Vec::with_capacity(t.len()),
        score_slope: Vec::with_capacity(t.len()),
        balance_slope: Vec::with_capacity(t.len()),
        score_curv: Vec::with_capacity(t.len()),
        balance_curv: Vec::with_capacity(t.len()),
    };
    for (&e, &ti) in eta.iter().zip(t) {
        let raw = expit(e);
        let pi = clamp_ps(raw);
        // Clamped units do not respond to β.
        let active = if raw > PS_CLAMP && raw < 1.0 - PS_CLAMP { 1.0 } else { 0.0 };
        let tf = f64::from(u8::from(ti));
        m.score.push(tf - pi);
        m.score_slope.push(-pi * (1.0 - pi) * active);
        m.score_curv.push(-pi * (1.0 - pi) * (1.0 - 2.0 * pi) * active);
        let odds = pi / (1.0 - pi);
        match estimand {
            Estimand::Att => {
                let scale = n / n_t;
                m.balance.push(scale * (tf - (1.0 - tf) * odds));
                m.balance_slope.push(-scale * (1.0 - tf) * odds * active);
                m.balance_curv.push(-scale * (1.0 - tf) * odds * active);
            }
            Estimand::Ate => {
                m.balance.push(tf / pi - (1.0 - tf) / (1.0 - pi));
                m.balance_slope.push(-(tf / odds + (1.0 - tf) * odds) * active);
                m.balance_curv.push((tf / odds - (1.0 - tf) * odds) * active);
            }
        }
    }
    m
}

fn block_mean(xa: &DMatrix<f64>, mult: &[f64]) -> DVector<f64> {
    xa.transpose() * DVector::from_column_slice(mult) / t_len(mult)
}

fn t_len(v: &[f64]) -> f64 {
    v.len() as f64
}

fn stack(mode: CbpsMode, score: DVector<f64>, balance: DVector<f64>) -> DVector<f64> {
    match mode {
        CbpsMode::JustIdentified => balance,
        CbpsMode::OverIdentified => {
            let k = score.len();
            let mut g = DVector::zeros(2 * k);
            g.rows_mut(0, k).copy_from(&score);
            g.rows_mut(k, k).copy_from(&balance);
            g
        }
    }
}

/// Stacked moment vector: score block `n⁻¹Σ(Tᵢ−πᵢ)dᵢ` followed by the
/// balance block (over-identified), or the balance block alone
/// (just-identified). `d` excludes the intercept, which is added here.
pub fn cbps_moment_conditions(beta: &[f64], d: &DMatrix<f64>, t: &[bool], estimand: Estimand, mode: CbpsMode) -> Result<Vec<f64>> {
    if beta.len() != d.ncols() + 1 {
        return Err(Error::DimensionMismatch { expected: d.ncols() + 1, found: beta.len() });
    }
    if t.len() != d.nrows() {
        return Err(Error::DimensionMismatch { expected: d.nrows(), found: t.len() });
    }
    group_sizes(t)?;
    let xa = with_intercept(d);
    let m = moment_terms(&xa, &DVector::from_column_slice(beta), t, estimand);
    Ok(stack(mode, block_mean(&xa, &m.score), block_mean(&xa, &m.balance)).as_slice().to_vec())
}

struct Gmm<'a> {
    xa: DMatrix<f64>,
    t: &'a [bool],
    estimand: Estimand,
    mode: CbpsMode,
    weight: Option<DMatrix<f64>>,
}

struct Eval {
    g: DVector<f64>,
    objective: f64,
    balance_residual: f64,
}

impl Gmm<'_> {
    fn moments(&self, beta: &DVector<f64>) -> (DVector<f64>, MomentTerms) {
        let m = moment_terms(&self.xa, beta, self.t, self.estimand);
        let g = stack(self.mode, block_mean(&self.xa, &m.score), block_mean(&self.xa, &m.balance));
        (g, m)
    }

    fn quad(&self, g: &DVector<f64>) -> f64 {
        match &self.weight {
            None => g.norm_squared(),
            Some(w) => (g.transpose() * w * g)[(0, 0)],
        }
    }

    fn eval(&self, beta: &DVector<f64>) -> Eval {
        let (g, _) = self.moments(beta);
        let k = self.xa.ncols();
        let balance = match self.mode {
            CbpsMode::JustIdentified => g.clone(),
            CbpsMode::OverIdentified => g.rows(k, k).into_owned(),
        };
        Eval { objective: self.quad(&g), balance_residual: sup_norm(balance.as_slice()), g }
    }

    fn jacobian(&self, m: &MomentTerms) -> DMatrix<f64> {
        let n = self.t.len() as f64;
        let jb = weighted_gram(&self.xa, &m.balance_slope) / n;
        match self.mode {
            CbpsMode::JustIdentified => jb,
            CbpsMode::OverIdentified => {
                let js = weighted_gram(&self.xa, &m.score_slope) / n;
                let k = self.xa.ncols();
                let mut j = DMatrix::zeros(2 * k, k);
                j.rows_mut(0, k).copy_from(&js);
                j.rows_mut(k, k).copy_from(&jb);
                j
            }
        }
    }

    /// `Σₖ vₖ ∇²gₖ`, the part of the objective Hessian that Gauss-Newton
    /// drops; `v = Wg`.
    fn curvature(&self, m: &MomentTerms, v: &DVector<f64>) -> DMatrix<f64> {
        let k = self.xa.ncols();
        let proj = |block: usize| &self.xa * v.rows(block * k, k);
        let c: Vec<f64> = match self.mode {
            CbpsMode::JustIdentified => {
                let pb = proj(0);
                (0..self.t.len()).map(|i| m.balance_curv[i] * pb[i]).collect()
            }
            CbpsMode::OverIdentified => {
                let (ps, pb) = (proj(0), proj(1));
                (0..self.t.len()).map(|i| m.score_curv[i] * ps[i] + m.balance_curv[i] * pb[i]).collect()
            }
        };
        weighted_gram(&self.xa, &c) / self.t.len() as f64
    }

    /// Sample covariance of the per-unit stacked moment contributions.
    fn moment_covariance(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let m = moment_terms(&self.xa, beta, self.t, self.estimand);
        let (n, k) = self.xa.shape();
        let width = match self.mode {
            CbpsMode::JustIdentified => k,
            CbpsMode::OverIdentified => 2 * k,
        };
        let mut contrib = DMatrix::zeros(n, width);
        for i in 0..n {
            for j in 0..k {
                let x = self.xa[(i, j)];
                match self.mode {
                    CbpsMode::JustIdentified => contrib[(i, j)] = m.balance[i] * x,
                    CbpsMode::OverIdentified => {
                        contrib[(i, j)] = m.score[i] * x;
                        contrib[(i, k + j)] = m.balance[i] * x;
                    }
                }
            }
        }
        let mean = contrib.row_mean();
        for mut row in contrib.row_iter_mut() {
            row -= &mean;
        }
        contrib.transpose() * &contrib / (n as f64 - 1.0)
    }

    /// Levenberg–Marquardt on `gᵀWg` from `start`.
    fn minimize(&self, start: &DVector<f64>, opts: &CbpsOptions) -> (DVector<f64>, Eval, usize) {
        let mut beta = start.clone();
        let mut cur = self.eval(&beta);
        let mut mu = 1e-3;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            let (g, terms) = self.moments(&beta);
            let j = self.jacobian(&terms);
            let wj = match &self.weight {
                None => j.clone(),
                Some(w) => w * &j,
            };
            let wg = match &self.weight {
                None => g.clone(),
                Some(w) => w * &g,
            };
            let grad = j.transpose() * &wg;
            let gn = j.transpose() * &wj;
            let full = &gn + self.curvature(&terms, &wg);
            if sup_norm(grad.as_slice()) < opts.gradient_tol || cur.objective == 0.0 {
                break;
            }
            iterations += 1;
            let mut stepped = false;
            while mu < 1e12 {
                // Damped Newton on the exact Hessian when it is positive
                // definite, damped Gauss-Newton otherwise.
                let damped = |h: &DMatrix<f64>| {
                    let mut lhs = h.clone();
                    for d in 0..lhs.nrows() {
                        lhs[(d, d)] += mu * gn[(d, d)].max(1e-12);
                    }
                    lhs
                };
                let step = damped(&full)
                    .cholesky()
                    .map(|c| c.solve(&(-&grad)))
                    .filter(|s| s.iter().all(|v| v.is_finite()))
                    .or_else(|| solve_spd(&damped(&gn), &(-&grad), 1e-12));
                if let Some(step) = step {
                    let candidate = &beta + step;
                    let next = self.eval(&candidate);
                    if next.objective.is_finite() && next.objective < cur.objective {
                        beta = candidate;
                        cur = next;
                        mu = (mu / 3.0).max(1e-12);
                        stepped = true;
                        break;
                    }
                }
                mu *= 4.0;
            }
            if !stepped {
                break;
            }
        }
        (beta, cur, iterations)
    }

    /// Local minimisation, then seeded random restarts if the local solve
    /// did not converge. Keeps the best objective.
    fn solve(&self, start: &DVector<f64>, opts: &CbpsOptions, converged: impl Fn(&Eval, &DVector<f64>) -> bool) -> (DVector<f64>, Eval, usize, bool) {
        let (mut beta, mut eval, mut iters) = self.minimize(start, opts);
        let mut ok = converged(&eval, &beta);
        if ok {
            return (beta, eval, iters, true);
        }
        let mut rng = <SimRng as rand::SeedableRng>::seed_from_u64(opts.seed);
        for _ in 0..opts.restarts {
            let jitter: DVector<f64> = DVector::from_fn(start.len(), |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
            let (b, e, it) = self.minimize(&(start + jitter), opts);
            iters += it;
            if e.objective < eval.objective {
                beta = b;
                eval = e;
                ok = converged(&eval, &beta);
                if ok {
                    break;
                }
            }
        }
        (beta, eval, iters, ok)
    }

    fn gradient_norm(&self, beta: &DVector<f64>) -> f64 {
        let (g, terms) = self.moments(beta);
        let j = self.jacobian(&terms);
        let wg = match &self.weight {
            None => g,
            Some(w) => w * g,
        };
        sup_norm((j.transpose() * wg).as_slice())
    }
}

/// Fits CBPS starting from the logistic maximum-likelihood estimate.
///
/// Just-identified: minimises `bᵀb`; converged when the balance residual is
/// below `balance_tol`. Over-identified: step one with identity weighting,
/// step two with the inverse sample covariance of the stacked per-unit
/// moments at the step-one estimate.
pub fn fit_cbps(d: &DMatrix<f64>, t: &[bool], estimand: Estimand, mode: CbpsMode, opts: &CbpsOptions) -> Result<CbpsModel> {
    if t.len() != d.nrows() {
        return Err(Error::DimensionMismatch { expected: d.nrows(), found: t.len() });
    }
    let (n_t, _) = group_sizes(t)?;
    let mle = fit_logistic(d, t, &LogitOptions::default())?;
    let start = if mle.separation {
        let mut b = DVector::zeros(d.ncols() + 1);
        b[0] = logit(n_t as f64 / t.len() as f64);
        b
    } else {
        DVector::from_vec(mle.beta)
    };

    let mut gmm = Gmm { xa: with_intercept(d), t, estimand, mode, weight: None };
    let (beta, eval, iterations, converged) = match mode {
        CbpsMode::JustIdentified => gmm.solve(&start, opts, |e, _| e.balance_residual < opts.balance_tol),
        CbpsMode::OverIdentified => {
            let loose = |gmm: &Gmm, b: &DVector<f64>| gmm.gradient_norm(b) < opts.gradient_tol.max(1e-6);
            let (b1, _, it1, _) = {
                let g = &gmm;
                g.solve(&start, opts, |_, b| loose(g, b))
            };
            let sigma = gmm.moment_covariance(&b1);
            let w = inverse_spd_ridged(&sigma, opts.ridge)
                .ok_or_else(|| Error::Singular("CBPS moment covariance is singular".into()))?;
            gmm.weight = Some(w);
            let g = &gmm;
            let (b2, e2, it2, ok) = g.solve(&b1, opts, |_, b| loose(g, b));
            (b2, e2, it1 + it2, ok)
        }
    };
    let _ = &eval.g;
    Ok(CbpsModel {
        beta: beta.as_slice().to_vec(),
        mode,
        estimand,
        gmm_objective: eval.objective,
        balance_residual: eval.balance_residual,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balancers::weights::weights_from_model;
    use crate::seed::SimRng;
    use rand::SeedableRng;

    /// Direct transcription of the moment formulas, unit by unit.
    fn moments_by_hand(beta: &[f64], d: &DMatrix<f64>, t: &[bool], estimand: Estimand, mode: CbpsMode) -> Vec<f64> {
        let n = t.len() as f64;
        let n_t = t.iter().filter(|&&b| b).count() as f64;
        let k = d.ncols() + 1;
        let mut s = vec![0.0; k];
        let mut b = vec![0.0; k];
        for i in 0..t.len() {
            let row: Vec<f64> = std::iter::once(1.0).chain(d.row(i).iter().copied()).collect();
            let eta: f64 = row.iter().zip(beta).map(|(x, c)| x * c).sum();
            let pi = (1.0 / (1.0 + (-eta).exp())).clamp(1e-6, 1.0 - 1e-6);
            let ti = if t[i] { 1.0 } else { 0.0 };
            for j in 0..k {
                s[j] += (ti - pi) * row[j] / n;
                b[j] += match estimand {
                    Estimand::Att => (ti - (1.0 - ti) * pi / (1.0 - pi)) * row[j] / n_t,
                    Estimand::Ate => (ti / pi - (1.0 - ti) / (1.0 - pi)) * row[j] / n,
                };
            }
        }
        match mode {
            CbpsMode::JustIdentified => b,
            CbpsMode::OverIdentified => s.into_iter().chain(b).collect(),
        }
    }

    fn random_data(n: usize, p: usize, seed: u64, strength: f64) -> (DMatrix<f64>, Vec<bool>) {
        let mut rng = SimRng::seed_from_u64(seed);
        let d = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = (0..n).map(|i| rng.random::<f64>() < expit(strength * (d[(i, 0)] - 0.5 * d[(i, p - 1)]))).collect();
        (d, t)
    }

    #[test]
    fn intercept_only_moments_vanish_at_prevalence() {
        let t = [true, false, false, true, true];
        let d = DMatrix::zeros(5, 0);
        let g = cbps_moment_conditions(&[logit(0.6)], &d, &t, Estimand::Ate, CbpsMode::OverIdentified).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn unit_odds_balance_att() {
        let d = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let g = cbps_moment_conditions(&[0.0, 0.0], &d, &[true, false], Estimand::Att, CbpsMode::JustIdentified).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn moments_match_transcription() {
        let (d, t) = random_data(40, 3, 1, 1.0);
        let beta = [0.2, -0.4, 0.7, 0.1];
        for estimand in [Estimand::Att, Estimand::Ate] {
            for mode in [CbpsMode::JustIdentified, CbpsMode::OverIdentified] {
                let a = cbps_moment_conditions(&beta, &d, &t, estimand, mode).unwrap();
                let b = moments_by_hand(&beta, &d, &t, estimand, mode);
                assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-12, "{estimand:?} {mode:?}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (d, t) = random_data(50, 2, 2, 0.8);
        let beta = DVector::from_vec(vec![0.1, 0.3, -0.2]);
        for estimand in [Estimand::Att, Estimand::Ate] {
            for mode in [CbpsMode::JustIdentified, CbpsMode::OverIdentified] {
                let gmm = Gmm { xa: with_intercept(&d), t: &t, estimand, mode, weight: None };
                let (_, terms) = gmm.moments(&beta);
                let j = gmm.jacobian(&terms);
                for c in 0..3 {
                    let h = 1e-6;
                    let mut bp = beta.clone();
                    let mut bm = beta.clone();
                    bp[c] += h;
                    bm[c] -= h;
                    let fd = (gmm.moments(&bp).0 - gmm.moments(&bm).0) / (2.0 * h);
                    for r in 0..j.nrows() {
                        assert!((fd[r] - j[(r, c)]).abs() < 1e-6, "{estimand:?} {mode:?} ({r},{c})");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_hessian_matches_finite_differences() {
        let (d, t) = random_data(60, 2, 6, 0.8);
        let beta = DVector::from_vec(vec![-0.1, 0.4, 0.2]);
        let w = DMatrix::from_fn(6, 6, |i, j| if i == j { 1.5 + i as f64 * 0.1 } else { 0.05 });
        for estimand in [Estimand::Att, Estimand::Ate] {
            for mode in [CbpsMode::JustIdentified, CbpsMode::OverIdentified] {
                let weight = (mode == CbpsMode::OverIdentified).then(|| w.clone());
                let gmm = Gmm { xa: with_intercept(&d), t: &t, estimand, mode, weight };
                let grad = |b: &DVector<f64>| {
                    let (g, terms) = gmm.moments(b);
                    let wg = gmm.weight.as_ref().map_or(g.clone(), |w| w * &g);
                    gmm.jacobian(&terms).transpose() * wg
                };
                let (g, terms) = gmm.moments(&beta);
                let j = gmm.jacobian(&terms);
                let wg = gmm.weight.as_ref().map_or(g.clone(), |w| w * &g);
                let wj = gmm.weight.as_ref().map_or(j.clone(), |w| w * &j);
                let h = j.transpose() * wj + gmm.curvature(&terms, &wg);
                for c in 0..3 {
                    let e = 1e-6;
                    let mut bp = beta.clone();
                    let mut bm = beta.clone();
                    bp[c] += e;
                    bm[c] -= e;
                    let fd = (grad(&bp) - grad(&bm)) / (2.0 * e);
                    for r in 0..3 {
                        assert!((fd[r] - h[(r, c)]).abs() < 1e-6 * (1.0 + h[(r, c)].abs()), "{estimand:?} {mode:?} ({r},{c})");
                    }
                }
            }
        }
    }

    #[test]
    fn intercept_only_exact_fit() {
        let d = DMatrix::zeros(4, 0);
        let m = fit_cbps(&d, &[true, true, false, false], Estimand::Ate, CbpsMode::JustIdentified, &CbpsOptions::default()).unwrap();
        assert!(m.converged);
        assert!(m.beta[0].abs() < 1e-10);
    }

    #[test]
    fn just_identified_att_balances_means() {
        let (d, t) = random_data(400, 3, 3, 0.7);
        let m = fit_cbps(&d, &t, Estimand::Att, CbpsMode::JustIdentified, &CbpsOptions::default()).unwrap();
        assert!(m.converged && m.balance_residual < 1e-6);
        let w = weights_from_model(&m, &d, &t, Estimand::Att).unwrap();
        for j in 0..3 {
            let (mut mt, mut mc) = (0.0, 0.0);
            for i in 0..t.len() {
                if t[i] {
                    mt += w[i] * d[(i, j)];
                } else {
                    mc += w[i] * d[(i, j)];
                }
            }
            assert!((mt - mc).abs() < 1e-6);
        }
    }

    #[test]
    fn just_identified_ate_converges() {
        let (d, t) = random_data(400, 2, 4, 0.6);
        let m = fit_cbps(&d, &t, Estimand::Ate, CbpsMode::JustIdentified, &CbpsOptions::default()).unwrap();
        assert!(m.converged && m.balance_residual < 1e-6);
    }

    #[test]
    fn over_identified_reaches_stationary_point() {
        let (d, t) = random_data(500, 3, 5, 0.8);
        for estimand in [Estimand::Att, Estimand::Ate] {
            let m = fit_cbps(&d, &t, estimand, CbpsMode::OverIdentified, &CbpsOptions::default()).unwrap();
            assert!(m.converged, "{estimand:?}");
            assert!(m.gmm_objective.is_finite() && m.gmm_objective >= 0.0);
            // Under a correct logistic model the balance conditions hold
            // approximately at the optimum as well.
            assert!(m.balance_residual < 0.2);
        }
    }

    #[test]
    fn single_class_is_an_error() {
        let d = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(fit_cbps(&d, &[false; 3], Estimand::Att, CbpsMode::JustIdentified, &CbpsOptions::default()).is_err());
    }
}
