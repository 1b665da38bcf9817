//! Synthetic data: covariates, the seven treatment-assignment mechanisms,
//! the five outcome models and the covariate-role bookkeeping behind the
//! six estimation strategies.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::expit;
use crate::seed::{self, rng_for};

/// Number of core covariates X₁…X₁₀.
pub const N_CORE: usize = 10;
pub const N_ALPHA: usize = 24;
pub const N_DELTA: usize = 8;

/// Treatment-assignment mechanism, A (additive, linear) through G
/// (moderate non-linearity and non-additivity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Mechanism {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Mechanism {
    pub const ALL: [Mechanism; 7] = [
        Mechanism::A,
        Mechanism::B,
        Mechanism::C,
        Mechanism::D,
        Mechanism::E,
        Mechanism::F,
        Mechanism::G,
    ];

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Mechanism::A),
            "B" => Ok(Mechanism::B),
            "C" => Ok(Mechanism::C),
            "D" => Ok(Mechanism::D),
            "E" => Ok(Mechanism::E),
            "F" => Ok(Mechanism::F),
            "G" => Ok(Mechanism::G),
            other => Err(Error::Config(format!("unknown treatment mechanism `{other}`"))),
        }
    }
}

impl TryFrom<String> for Mechanism {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mechanism> for String {
    fn from(m: Mechanism) -> String {
        m.to_string()
    }
}

/// Outcome model 1 (additive, linear) through 5 (sinusoidal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct OutcomeModel(u8);

impl OutcomeModel {
    pub fn new(k: u8) -> Result<Self> {
        if (1..=5).contains(&k) {
            Ok(OutcomeModel(k))
        } else {
            Err(Error::Config(format!("outcome model must be in 1..=5, got {k}")))
        }
    }

    pub fn all() -> impl Iterator<Item = OutcomeModel> {
        (1..=5).map(OutcomeModel)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for OutcomeModel {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        OutcomeModel::new(k)
    }
}

impl From<OutcomeModel> for u8 {
    fn from(m: OutcomeModel) -> u8 {
        m.0
    }
}

impl fmt::Display for OutcomeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which covariates enter the weighting model, 1 through 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Strategy(u8);

impl Strategy {
    pub fn new(k: u8) -> Result<Self> {
        if (1..=6).contains(&k) {
            Ok(Strategy(k))
        } else {
            Err(Error::Config(format!("estimation strategy must be in 1..=6, got {k}")))
        }
    }

    pub fn all() -> impl Iterator<Item = Strategy> {
        (1..=6).map(Strategy)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Strategy {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        Strategy::new(k)
    }
}

impl From<Strategy> for u8 {
    fn from(s: Strategy) -> u8 {
        s.0
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Marginal law of a core covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Marginal {
    #[default]
    StandardNormal,
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateSpec {
    pub n_distractor: usize,
    /// One entry per core covariate; an empty list means all standard normal.
    pub marginals: Vec<Marginal>,
    /// Row-major correlation matrix over the core covariates.
    pub correlation: Option<Vec<Vec<f64>>>,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        CovariateSpec {
            n_distractor: 3,
            marginals: Vec::new(),
            correlation: None,
        }
    }
}

impl CovariateSpec {
    pub fn n_columns(&self) -> usize {
        N_CORE + self.n_distractor
    }

    pub fn marginal(&self, j: usize) -> Marginal {
        self.marginals.get(j).copied().unwrap_or_default()
    }

    pub fn correlation_matrix(&self) -> Option<DMatrix<f64>> {
        self.correlation.as_ref().map(|rows| {
            DMatrix::from_fn(N_CORE, N_CORE, |i, j| rows.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.marginals.is_empty() && self.marginals.len() != N_CORE {
            return Err(Error::Config(format!(
                "marginals must list {N_CORE} entries, got {}",
                self.marginals.len()
            )));
        }
        for m in &self.marginals {
            if let Marginal::Bernoulli { p } = *m {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Config(format!("bernoulli p must be in (0,1), got {p}")));
                }
            }
        }
        self.correlation_cholesky().map(|_| ())
    }

    /// Lower Cholesky factor of the core correlation matrix, if one is set.
    fn correlation_cholesky(&self) -> Result<Option<DMatrix<f64>>> {
        let Some(rows) = &self.correlation else {
            return Ok(None);
        };
        if rows.len() != N_CORE || rows.iter().any(|r| r.len() != N_CORE) {
            return Err(Error::Config(format!("correlation matrix must be {N_CORE}x{N_CORE}")));
        }
        let c = self.correlation_matrix().expect("checked above");
        for i in 0..N_CORE {
            if (c[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::Config("correlation matrix must have unit diagonal".into()));
            }
            for j in 0..i {
                if !c[(i, j)].is_finite() || (c[(i, j)] - c[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Config("correlation matrix must be symmetric".into()));
                }
            }
        }
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::Config("correlation matrix is not positive definite".into()))?;
        Ok(Some(chol.l()))
    }
}

/// Treatment (α) and outcome (δ) coefficients, true effect and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSet {
    /// α₁…α₂₄; `alpha[k - 1]` is αₖ.
    pub alpha: Vec<f64>,
    pub alpha0: f64,
    /// δ₀…δ₇; `delta[k]` is δₖ.
    pub delta: Vec<f64>,
    pub theta: f64,
    pub sigma_eps: f64,
    /// Adds the δ₆X₉ term to outcome model 1, which the printed formula omits.
    pub model1_include_x9: bool,
}

fn alternating(magnitude: f64, k: usize) -> f64 {
    if k.is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    }
}

impl Default for CoefficientSet {
    fn default() -> Self {
        let alpha = (0..N_ALPHA).map(|k| if k < 7 { alternating(0.4, k) } else { 0.25 }).collect();
        let delta = (0..N_DELTA).map(|k| if k == 0 { 0.0 } else { alternating(0.3, k - 1) }).collect();
        CoefficientSet {
            alpha,
            alpha0: 0.0,
            delta,
            theta: 0.5,
            sigma_eps: 1.0,
            model1_include_x9: false,
        }
    }
}

impl CoefficientSet {
    /// All α, δ and noise zero; intercepts zero; θ as given.
    pub fn zeros(theta: f64) -> Self {
        CoefficientSet {
            alpha: vec![0.0; N_ALPHA],
            alpha0: 0.0,
            delta: vec![0.0; N_DELTA],
            theta,
            sigma_eps: 0.0,
            model1_include_x9: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != N_ALPHA {
            return Err(Error::Config(format!("alpha must have {N_ALPHA} entries, got {}", self.alpha.len())));
        }
        if self.delta.len() != N_DELTA {
            return Err(Error::Config(format!("delta must have {N_DELTA} entries, got {}", self.delta.len())));
        }
        let finite = self
            .alpha
            .iter()
            .chain(&self.delta)
            .chain([&self.alpha0, &self.theta, &self.sigma_eps])
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        if self.sigma_eps < 0.0 {
            return Err(Error::Config("sigma_eps must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub mechanism: Mechanism,
    pub outcome_model: OutcomeModel,
    pub strategy: Strategy,
    pub n: usize,
    pub covariates: CovariateSpec,
    pub coefficients: CoefficientSet,
    /// When set, α₀ is calibrated to this prevalence and `coefficients.alpha0`
    /// is ignored.
    pub target_prevalence: Option<f64>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::Config(format!("sample size must be at least 50, got {}", self.n)));
        }
        if let Some(p) = self.target_prevalence {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("target prevalence must be in (0,1), got {p}")));
            }
        }
        self.covariates.validate()?;
        self.coefficients.validate()
    }
}

/// What a covariate does in the data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Confounder,
    TreatmentOnly,
    Instrument,
    OutcomeOnly,
    Distractor,
}

pub fn default_roles(n_columns: usize) -> Vec<Role> {
    (0..n_columns)
        .map(|j| match j {
            0..=3 => Role::Confounder,
            4 | 5 => Role::TreatmentOnly,
            6 => Role::Instrument,
            7..=9 => Role::OutcomeOnly,
            _ => Role::Distractor,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub x: DMatrix<f64>,
    pub t: Vec<bool>,
    pub y: Vec<f64>,
    pub theta_true: f64,
    pub roles: Vec<Role>,
}

/// Draws an `n × (10 + n_distractor)` covariate matrix.
///
/// Core columns come from a Gaussian copula with the configured correlation;
/// Bernoulli marginals threshold the latent normal. Distractors are iid N(0,1).
pub fn generate_covariates<R: Rng + ?Sized>(spec: &CovariateSpec, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::EmptyInput("sample size must be positive".into()));
    }
    spec.validate()?;
    let chol = spec.correlation_cholesky()?;
    let p = spec.n_columns();
    let std_normal = Normal::standard();
    let thresholds: Vec<Option<f64>> = (0..N_CORE)
        .map(|j| match spec.marginal(j) {
            Marginal::StandardNormal => None,
            Marginal::Bernoulli { p } => Some(std_normal.inverse_cdf(1.0 - p)),
        })
        .collect();

    let mut x = DMatrix::zeros(n, p);
    let mut z = [0.0; N_CORE];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        for j in 0..N_CORE {
            let latent = match &chol {
                Some(l) => (0..=j).map(|k| l[(j, k)] * z[k]).sum(),
                None => z[j],
            };
            x[(i, j)] = match thresholds[j] {
                None => latent,
                Some(cut) => f64::from(u8::from(latent > cut)),
            };
        }
        for j in N_CORE..p {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(x)
}

/// Evaluates Version_mechanism without intercept for one row (`x[k-1]` is Xₖ).
fn version(mechanism: Mechanism, a: &[f64], x: &[f64]) -> f64 {
    let xk = |k: usize| x[k - 1];
    let ak = |k: usize| a[k - 1];
    let version_a: f64 = (1..=7).map(|k| ak(k) * xk(k)).sum();
    let version_d =
        || version_a + ak(12) * xk(1) * xk(3) + ak(13) * xk(2) * xk(4) + ak(14) * xk(4) * xk(5) + ak(15) * xk(5) * xk(6);
    let version_f = || {
        version_d()
            + ak(17) * xk(5) * xk(7)
            + ak(18) * xk(1) * xk(6)
            + ak(19) * xk(2) * xk(3)
            + ak(20) * xk(3) * xk(4)
            + ak(21) * xk(4) * xk(5)
    };
    match mechanism {
        Mechanism::A => version_a,
        Mechanism::B => version_a + ak(8) * xk(2).powi(2),
        Mechanism::C => version_a + ak(9) * xk(2).powi(2) + ak(10) * xk(4).powi(2) + ak(11) * xk(7).powi(2),
        Mechanism::D => version_d(),
        Mechanism::E => version_d() + ak(16) * xk(2).powi(2),
        Mechanism::F => version_f(),
        Mechanism::G => version_f() + ak(22) * xk(2).powi(2) + ak(23) * xk(4).powi(2) + ak(24) * xk(7).powi(2),
    }
}

fn version_all(x: &DMatrix<f64>, mechanism: Mechanism, alpha: &[f64]) -> Result<Vec<f64>> {
    if x.ncols() < 7 {
        return Err(Error::DimensionMismatch { expected: 7, found: x.ncols() });
    }
    if alpha.len() != N_ALPHA {
        return Err(Error::Config(format!("alpha must have {N_ALPHA} entries")));
    }
    let mut row = [0.0; 7];
    Ok((0..x.nrows())
        .map(|i| {
            for (k, r) in row.iter_mut().enumerate() {
                *r = x[(i, k)];
            }
            version(mechanism, alpha, &row)
        })
        .collect())
}

/// `α₀ + Version_mechanism(Xᵢ)` for every row.
pub fn linear_predictor(x: &DMatrix<f64>, mechanism: Mechanism, coeffs: &CoefficientSet) -> Result<Vec<f64>> {
    let mut lp = version_all(x, mechanism, &coeffs.alpha)?;
    lp.iter_mut().for_each(|v| *v += coeffs.alpha0);
    Ok(lp)
}

/// Maximum number of redraws when a treatment draw is all-treated or all-control.
pub const MAX_TREATMENT_REDRAWS: usize = 10;

/// Tᵢ ~ Bernoulli(expit(linear predictor)); redraws degenerate vectors.
pub fn assign_treatment<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    mechanism: Mechanism,
    coeffs: &CoefficientSet,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let probs: Vec<f64> = linear_predictor(x, mechanism, coeffs)?.into_iter().map(expit).collect();
    for _ in 0..=MAX_TREATMENT_REDRAWS {
        let t: Vec<bool> = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
        let n_t = t.iter().filter(|&&ti| ti).count();
        if n_t > 0 && n_t < t.len() {
            return Ok(t);
        }
    }
    Err(Error::ScenarioInfeasible(format!(
        "treatment assignment under mechanism {mechanism} was degenerate after {MAX_TREATMENT_REDRAWS} redraws"
    )))
}

pub const DEFAULT_CALIBRATION_DRAWS: usize = 100_000;

/// Finds α₀ such that the mean of expit(α₀ + Version(X)) over a calibration
/// sample equals `target_prevalence` (to well within 10⁻³), by bisection on
/// [−50, 50].
pub fn calibrate_intercept<R: Rng + ?Sized>(
    mechanism: Mechanism,
    coeffs: &CoefficientSet,
    covariates: &CovariateSpec,
    target_prevalence: f64,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if !(target_prevalence > 0.0 && target_prevalence < 1.0) {
        return Err(Error::Calibration(format!("target prevalence {target_prevalence} outside (0,1)")));
    }
    let x = generate_covariates(covariates, draws, rng)?;
    let v = version_all(&x, mechanism, &coeffs.alpha)?;
    let excess = |a0: f64| v.iter().map(|&vi| expit(a0 + vi)).sum::<f64>() / v.len() as f64 - target_prevalence;

    let (mut lo, mut hi) = (-50.0, 50.0);
    if excess(lo) > 0.0 || excess(hi) < 0.0 {
        return Err(Error::Calibration(format!(
            "prevalence {target_prevalence} not bracketed by alpha0 in [-50, 50]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome per the chosen model plus N(0, sigma_eps²) noise.
pub fn generate_outcome<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    t: &[bool],
    model: OutcomeModel,
    coeffs: &CoefficientSet,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if x.ncols() < N_CORE {
        return Err(Error::DimensionMismatch { expected: N_CORE, found: x.ncols() });
    }
    if t.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: t.len() });
    }
    let d = &coeffs.delta;
    if d.len() != N_DELTA {
        return Err(Error::Config(format!("delta must have {N_DELTA} entries")));
    }
    let y = (0..x.nrows())
        .map(|i| {
            let xk = |k: usize| x[(i, k - 1)];
            let base = d[0] + coeffs.theta * f64::from(u8::from(t[i]));
            let tail = d[5] * xk(8) + d[6] * xk(9) + d[7] * xk(10);
            let systematic = match model.get() {
                1 => {
                    let x9 = if coeffs.model1_include_x9 { d[6] * xk(9) } else { 0.0 };
                    d[1] * xk(1) + d[2] * xk(2) + d[3] * xk(3) + d[4] * xk(4) + d[5] * xk(8) + x9 + d[7] * xk(10)
                }
                2 => d[1] * xk(1) + d[2] * xk(2).powi(2) + d[3] * xk(3) + d[4] * (1.3 * xk(4)).exp() + tail,
                3 => (d[1] * xk(1) + d[2] * xk(2) + d[3] * xk(3) + d[4] * xk(4) + tail).exp(),
                4 => (d[1] * xk(1) + d[2] * xk(2) + d[3] * xk(3)).exp() + d[4] * (1.3 * xk(4)).exp() + tail,
                5 => 4.0 * (d[1] * xk(1) + d[2] * xk(2) + d[3] * xk(3) + d[4] * xk(4) + tail).sin(),
                _ => unreachable!("OutcomeModel is validated on construction"),
            };
            base + systematic
        })
        .collect::<Vec<_>>();
    if coeffs.sigma_eps == 0.0 {
        return Ok(y);
    }
    Ok(y.into_iter()
        .map(|yi| yi + coeffs.sigma_eps * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Zero-based column indices used by an estimation strategy.
///
/// Strategy 4 adds to X₁–X₄ every other core covariate with nonzero
/// correlation to one of them under `correlation`.
pub fn strategy_columns(strategy: Strategy, roles: &[Role], correlation: Option<&DMatrix<f64>>) -> Vec<usize> {
    let core = roles.len().min(N_CORE);
    match strategy.get() {
        1 => (0..4.min(core)).collect(),
        2 => (0..7.min(core)).collect(),
        3 => (0..core).filter(|j| !(4..7).contains(j)).collect(),
        4 => (0..core)
            .filter(|&j| {
                j < 4
                    || correlation.is_some_and(|c| (0..4).any(|k| c[(j, k)].abs() > 0.0))
            })
            .collect(),
        5 => (0..core).collect(),
        _ => (0..roles.len()).collect(),
    }
}

/// α₀ used for a scenario: calibrated when a target prevalence is set.
///
/// The calibration sample is drawn from its own stream keyed on the master
/// seed and the mechanism only.
pub fn resolve_intercept(spec: &ScenarioSpec, master_seed: u64) -> Result<f64> {
    match spec.target_prevalence {
        None => Ok(spec.coefficients.alpha0),
        Some(p) => {
            let mut rng = rng_for(master_seed, &[seed::stream::CALIBRATION, spec.mechanism.index()]);
            calibrate_intercept(
                spec.mechanism,
                &spec.coefficients,
                &spec.covariates,
                p,
                DEFAULT_CALIBRATION_DRAWS,
                &mut rng,
            )
        }
    }
}

/// Covariates and treatment for replication `rep`.
///
/// The stream depends on the mechanism and the replication but not on the
/// outcome model or strategy, so all outcome models and strategies of a
/// replication share one covariate/treatment draw.
pub fn draw_covariates_and_treatment(
    spec: &ScenarioSpec,
    alpha0: f64,
    master_seed: u64,
    rep: u64,
) -> Result<(DMatrix<f64>, Vec<bool>)> {
    let mut rng = rng_for(master_seed, &[seed::stream::DATASET, spec.mechanism.index(), rep]);
    let x = generate_covariates(&spec.covariates, spec.n, &mut rng)?;
    let coeffs = CoefficientSet { alpha0, ..spec.coefficients.clone() };
    let t = assign_treatment(&x, spec.mechanism, &coeffs, &mut rng)?;
    Ok((x, t))
}

pub fn draw_outcome(spec: &ScenarioSpec, x: &DMatrix<f64>, t: &[bool], master_seed: u64, rep: u64) -> Result<Vec<f64>> {
    let key = [
        seed::stream::OUTCOME,
        spec.mechanism.index(),
        u64::from(spec.outcome_model.get()),
        rep,
    ];
    generate_outcome(x, t, spec.outcome_model, &spec.coefficients, &mut rng_for(master_seed, &key))
}

/// Full dataset for `(spec, master_seed, rep)`; bit-for-bit reproducible.
pub fn generate_dataset(spec: &ScenarioSpec, master_seed: u64, rep: u64) -> Result<SimulatedDataset> {
    spec.validate()?;
    let alpha0 = resolve_intercept(spec, master_seed)?;
    let (x, t) = draw_covariates_and_treatment(spec, alpha0, master_seed, rep)?;
    let y = draw_outcome(spec, &x, &t, master_seed, rep)?;
    let roles = default_roles(x.ncols());
    Ok(SimulatedDataset {
        x,
        t,
        y,
        theta_true: spec.coefficients.theta,
        roles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use rand::SeedableRng;

    fn ones_row(p: usize) -> DMatrix<f64> {
        DMatrix::from_element(1, p, 1.0)
    }

    fn alpha_all(v: f64) -> CoefficientSet {
        CoefficientSet {
            alpha: vec![v; N_ALPHA],
            ..CoefficientSet::zeros(0.0)
        }
    }

    #[test]
    fn covariate_means_vanish_at_large_n() {
        let mut rng = SimRng::seed_from_u64(11);
        let x = generate_covariates(&CovariateSpec::default(), 100_000, &mut rng).unwrap();
        assert_eq!(x.ncols(), 13);
        for j in 0..13 {
            assert!(x.column(j).mean().abs() < 0.02, "column {j}");
        }
    }

    #[test]
    fn covariate_shapes_and_determinism() {
        let spec = CovariateSpec::default();
        let x1 = generate_covariates(&spec, 1, &mut SimRng::seed_from_u64(1)).unwrap();
        assert_eq!(x1.shape(), (1, 13));
        assert!(x1.iter().all(|v| v.is_finite()));
        let x4 = generate_covariates(&spec, 4, &mut SimRng::seed_from_u64(1)).unwrap();
        assert_eq!(x4.shape(), (4, 13));
        let a = generate_covariates(&spec, 50, &mut SimRng::seed_from_u64(5)).unwrap();
        let b = generate_covariates(&spec, 50, &mut SimRng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_pd_correlation() {
        let mut rows = vec![vec![0.0; N_CORE]; N_CORE];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        rows[0][1] = 1.5;
        rows[1][0] = 1.5;
        let spec = CovariateSpec { correlation: Some(rows), ..Default::default() };
        let err = generate_covariates(&spec, 10, &mut SimRng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn copula_bernoulli_and_correlation() {
        let mut rows = vec![vec![0.0; N_CORE]; N_CORE];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        rows[0][4] = 0.6;
        rows[4][0] = 0.6;
        let mut marginals = vec![Marginal::StandardNormal; N_CORE];
        marginals[2] = Marginal::Bernoulli { p: 0.3 };
        let spec = CovariateSpec { correlation: Some(rows), marginals, n_distractor: 0 };
        let x = generate_covariates(&spec, 50_000, &mut SimRng::seed_from_u64(3)).unwrap();
        assert!(x.column(2).iter().all(|&v| v == 0.0 || v == 1.0));
        assert!((x.column(2).mean() - 0.3).abs() < 0.01);
        let r = x.column(0).dot(&x.column(4)) / x.nrows() as f64;
        assert!((r - 0.6).abs() < 0.02);
    }

    #[test]
    fn mechanism_b_on_unit_row() {
        let v = linear_predictor(&ones_row(7), Mechanism::B, &alpha_all(1.0)).unwrap();
        assert_eq!(v, vec![8.0]);
    }

    #[test]
    fn mechanism_a_with_zero_alpha() {
        let x = DMatrix::from_fn(5, 10, |i, j| (i * 3 + j) as f64 - 7.0);
        let v = linear_predictor(&x, Mechanism::A, &CoefficientSet::zeros(0.0)).unwrap();
        assert!(v.iter().all(|&vi| vi == 0.0));
    }

    #[test]
    fn mechanism_g_on_unit_row() {
        let v = linear_predictor(&ones_row(7), Mechanism::G, &alpha_all(1.0)).unwrap();
        assert_eq!(v, vec![19.0]);
    }

    #[test]
    fn linear_predictor_needs_seven_columns() {
        assert!(linear_predictor(&ones_row(6), Mechanism::A, &alpha_all(1.0)).is_err());
    }

    /// Every α term in isolation evaluates to exactly its printed monomial.
    #[test]
    fn single_coefficient_terms() {
        let x: Vec<f64> = vec![1.5, -2.0, 0.5, 3.0, -1.25, 0.75, 2.5];
        let row = DMatrix::from_row_slice(1, 7, &x);
        let xk = |k: usize| x[k - 1];
        // (alpha index, mechanisms containing it, monomial value)
        let mut cases: Vec<(usize, Vec<Mechanism>, f64)> = (1..=7).map(|k| (k, Mechanism::ALL.to_vec(), xk(k))).collect();
        use Mechanism::*;
        cases.extend([
            (8, vec![B], xk(2).powi(2)),
            (9, vec![C], xk(2).powi(2)),
            (10, vec![C], xk(4).powi(2)),
            (11, vec![C], xk(7).powi(2)),
            (12, vec![D, E, F, G], xk(1) * xk(3)),
            (13, vec![D, E, F, G], xk(2) * xk(4)),
            (14, vec![D, E, F, G], xk(4) * xk(5)),
            (15, vec![D, E, F, G], xk(5) * xk(6)),
            (16, vec![E], xk(2).powi(2)),
            (17, vec![F, G], xk(5) * xk(7)),
            (18, vec![F, G], xk(1) * xk(6)),
            (19, vec![F, G], xk(2) * xk(3)),
            (20, vec![F, G], xk(3) * xk(4)),
            (21, vec![F, G], xk(4) * xk(5)),
            (22, vec![G], xk(2).powi(2)),
            (23, vec![G], xk(4).powi(2)),
            (24, vec![G], xk(7).powi(2)),
        ]);
        for (k, present, term) in cases {
            let mut c = CoefficientSet::zeros(0.0);
            c.alpha[k - 1] = 1.7;
            for m in Mechanism::ALL {
                let v = linear_predictor(&row, m, &c).unwrap()[0];
                let expect = if present.contains(&m) { 1.7 * term } else { 0.0 };
                assert_eq!(v, expect, "alpha{k} under {m}");
            }
        }
    }

    #[test]
    fn randomized_prevalence_is_one_half() {
        let mut rng = SimRng::seed_from_u64(21);
        let x = generate_covariates(&CovariateSpec::default(), 100_000, &mut rng).unwrap();
        let t = assign_treatment(&x, Mechanism::A, &CoefficientSet::zeros(0.0), &mut rng).unwrap();
        let prev = t.iter().filter(|&&b| b).count() as f64 / t.len() as f64;
        assert!((prev - 0.5).abs() < 0.01);
    }

    #[test]
    fn saturated_intercept_is_infeasible() {
        let mut rng = SimRng::seed_from_u64(2);
        let x = generate_covariates(&CovariateSpec::default(), 100, &mut rng).unwrap();
        let c = CoefficientSet { alpha0: 20.0, ..CoefficientSet::zeros(0.0) };
        let err = assign_treatment(&x, Mechanism::A, &c, &mut rng).unwrap_err();
        assert!(matches!(err, Error::ScenarioInfeasible(_)));
    }

    #[test]
    fn treatment_is_deterministic() {
        let spec = CovariateSpec::default();
        let run = || {
            let mut rng = SimRng::seed_from_u64(99);
            let x = generate_covariates(&spec, 200, &mut rng).unwrap();
            assign_treatment(&x, Mechanism::C, &CoefficientSet::default(), &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn calibration_closed_forms() {
        let cov = CovariateSpec::default();
        let zero = CoefficientSet::zeros(0.0);
        let mut rng = SimRng::seed_from_u64(4);
        let a = calibrate_intercept(Mechanism::A, &zero, &cov, 0.5, 10_000, &mut rng).unwrap();
        assert!(a.abs() < 1e-3);
        let a = calibrate_intercept(Mechanism::A, &zero, &cov, 0.75, 10_000, &mut rng).unwrap();
        assert!((a - 3f64.ln()).abs() < 1e-3);
        let a = calibrate_intercept(Mechanism::C, &alpha_all(1.0), &cov, 0.5, 10_000, &mut rng).unwrap();
        assert!(a < 0.0);
        assert!(calibrate_intercept(Mechanism::A, &zero, &cov, 1.0, 100, &mut rng).is_err());
    }

    #[test]
    fn calibrated_prevalence_matches_target() {
        let spec = ScenarioSpec {
            mechanism: Mechanism::G,
            outcome_model: OutcomeModel::new(1).unwrap(),
            strategy: Strategy::new(5).unwrap(),
            n: 100_000,
            covariates: CovariateSpec::default(),
            coefficients: CoefficientSet::default(),
            target_prevalence: Some(0.3),
        };
        let a0 = resolve_intercept(&spec, 17).unwrap();
        let (_, t) = draw_covariates_and_treatment(&spec, a0, 17, 0).unwrap();
        let prev = t.iter().filter(|&&b| b).count() as f64 / t.len() as f64;
        assert!((prev - 0.3).abs() < 0.01, "prevalence {prev}");
    }

    #[test]
    fn outcome_examples() {
        let x = DMatrix::zeros(1, 10);
        let mut rng = SimRng::seed_from_u64(0);
        let c = CoefficientSet::zeros(2.0);
        let y = generate_outcome(&x, &[true], OutcomeModel::new(1).unwrap(), &c, &mut rng).unwrap();
        assert_eq!(y, vec![2.0]);

        let mut c = CoefficientSet::zeros(0.0);
        c.delta[0] = 1.0;
        let y = generate_outcome(&x, &[false], OutcomeModel::new(5).unwrap(), &c, &mut rng).unwrap();
        assert_eq!(y, vec![1.0]);

        let c = CoefficientSet::zeros(0.0);
        let xr = DMatrix::from_fn(1, 10, |_, j| j as f64 + 0.3);
        let y = generate_outcome(&xr, &[true], OutcomeModel::new(3).unwrap(), &c, &mut rng).unwrap();
        assert_eq!(y, vec![1.0]);
    }

    #[test]
    fn outcome_is_intercept_plus_effect_without_covariate_influence() {
        let mut rng = SimRng::seed_from_u64(8);
        let x = generate_covariates(&CovariateSpec::default(), 50, &mut rng).unwrap();
        let t: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let mut c = CoefficientSet::zeros(1.25);
        c.delta[0] = -0.5;
        // Model 4 keeps exp(0) = 1 from its first term, model 3 is exp(0) = 1.
        for (k, shift) in [(1, 0.0), (2, 0.0), (3, 1.0), (4, 1.0), (5, 0.0)] {
            let y = generate_outcome(&x, &t, OutcomeModel::new(k).unwrap(), &c, &mut rng).unwrap();
            for (yi, &ti) in y.iter().zip(&t) {
                assert_eq!(*yi, -0.5 + shift + if ti { 1.25 } else { 0.0 });
            }
        }
    }

    #[test]
    fn model_one_switch_adds_x9() {
        let x = DMatrix::from_fn(1, 10, |_, j| if j == 8 { 2.0 } else { 0.0 });
        let mut c = CoefficientSet::zeros(0.0);
        c.delta[6] = 3.0;
        let m1 = OutcomeModel::new(1).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(generate_outcome(&x, &[false], m1, &c, &mut rng).unwrap(), vec![0.0]);
        c.model1_include_x9 = true;
        assert_eq!(generate_outcome(&x, &[false], m1, &c, &mut rng).unwrap(), vec![6.0]);
    }

    #[test]
    fn strategy_mapping() {
        let roles = default_roles(13);
        let s = |k| strategy_columns(Strategy::new(k).unwrap(), &roles, None);
        assert_eq!(s(1), vec![0, 1, 2, 3]);
        assert_eq!(s(2), (0..7).collect::<Vec<_>>());
        assert_eq!(s(3), vec![0, 1, 2, 3, 7, 8, 9]);
        assert_eq!(s(4), vec![0, 1, 2, 3]);
        assert_eq!(s(5), (0..10).collect::<Vec<_>>());
        assert_eq!(s(6), (0..13).collect::<Vec<_>>());

        let mut c = DMatrix::identity(N_CORE, N_CORE);
        c[(8, 2)] = 0.4;
        c[(2, 8)] = 0.4;
        let s4 = strategy_columns(Strategy::new(4).unwrap(), &roles, Some(&c));
        assert_eq!(s4, vec![0, 1, 2, 3, 8]);
    }

    #[test]
    fn strategy_sets_are_nested() {
        let roles = default_roles(16);
        let set = |k| strategy_columns(Strategy::new(k).unwrap(), &roles, None);
        let subset = |a: &[usize], b: &[usize]| a.iter().all(|v| b.contains(v));
        assert!(subset(&set(1), &set(2)));
        assert!(subset(&set(2), &set(5)));
        assert!(subset(&set(5), &set(6)));
        assert!(subset(&set(1), &set(3)));
        assert!(subset(&set(3), &set(5)));
    }

    #[test]
    fn default_roles_follow_layout() {
        let r = default_roles(13);
        assert_eq!(r[0], Role::Confounder);
        assert_eq!(r[4], Role::TreatmentOnly);
        assert_eq!(r[6], Role::Instrument);
        assert_eq!(r[9], Role::OutcomeOnly);
        assert_eq!(r[12], Role::Distractor);
    }

    #[test]
    fn dataset_is_reproducible() {
        let spec = ScenarioSpec {
            mechanism: Mechanism::E,
            outcome_model: OutcomeModel::new(4).unwrap(),
            strategy: Strategy::new(6).unwrap(),
            n: 300,
            covariates: CovariateSpec::default(),
            coefficients: CoefficientSet::default(),
            target_prevalence: None,
        };
        let a = generate_dataset(&spec, 42, 3).unwrap();
        let b = generate_dataset(&spec, 42, 3).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.t, b.t);
        assert_eq!(a.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let c = generate_dataset(&spec, 42, 4).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn default_coefficients_match_documented_values() {
        let c = CoefficientSet::default();
        assert_eq!(&c.alpha[..7], &[0.4, -0.4, 0.4, -0.4, 0.4, -0.4, 0.4]);
        assert!(c.alpha[7..].iter().all(|&a| a == 0.25));
        assert_eq!(c.delta, vec![0.0, 0.3, -0.3, 0.3, -0.3, 0.3, -0.3, 0.3]);
        assert_eq!((c.theta, c.sigma_eps), (0.5, 1.0));
    }
}
