use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::balancers::{entropy_balance_weights, fit_cbps, weights_from_propensity, CbpsMode, CbpsOptions, EbOptions};
use crate::design::{build_design, Reference};
use crate::error::{Error, Result};
use crate::propensity::{fit_gbm, fit_logistic, select_iteration, GbmParams, LogitOptions, PropensityModel};
use crate::seed::rng_for;
use crate::types::{Estimand, MomentOrder};

/// Weighting method families, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodFamily {
    Logit,
    Gbm,
    Eb,
    CbpsDefault,
    CbpsExact,
}

impl MethodFamily {
    pub const ALL: [MethodFamily; 5] =
        [MethodFamily::Logit, MethodFamily::Gbm, MethodFamily::Eb, MethodFamily::CbpsDefault, MethodFamily::CbpsExact];

    /// Whether the family balances an expanded moment design.
    pub fn uses_moments(self) -> bool {
        matches!(self, MethodFamily::Eb | MethodFamily::CbpsDefault | MethodFamily::CbpsExact)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodFamily::Logit => "logit",
            MethodFamily::Gbm => "gbm",
            MethodFamily::Eb => "eb",
            MethodFamily::CbpsDefault => "cbps-default",
            MethodFamily::CbpsExact => "cbps-exact",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MethodFamily::Logit => "Logit",
            MethodFamily::Gbm => "GBM",
            MethodFamily::Eb => "EB",
            MethodFamily::CbpsDefault => "CBPS default",
            MethodFamily::CbpsExact => "CBPS exact",
        }
    }
}

impl fmt::Display for MethodFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown method family `{s}` (expected logit, gbm, eb, cbps-default or cbps-exact)")))
    }
}

/// One weighting method. `moments` is `None` exactly for logit and gbm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodSpec {
    pub family: MethodFamily,
    pub moments: Option<MomentOrder>,
    pub estimand: Estimand,
}

impl MethodSpec {
    /// Drops `moments` for families that ignore it and requires it for the rest.
    pub fn new(family: MethodFamily, moments: Option<MomentOrder>, estimand: Estimand) -> Result<Self> {
        let moments = if family.uses_moments() {
            Some(moments.ok_or_else(|| Error::Config(format!("method `{family}` needs a moment order")))?)
        } else {
            None
        };
        Ok(MethodSpec { family, moments, estimand })
    }

    /// Moment order used to build the design; first moments for logit.
    fn design_order(&self) -> MomentOrder {
        self.moments.unwrap_or(MomentOrder::First)
    }

    /// Short label used in report headers, e.g. `EB m=2`.
    pub fn label(&self) -> String {
        let mut s = self.family.label().to_string();
        if let Some(m) = self.moments {
            s.push_str(&format!(" m={m}"));
        }
        if self.estimand != Estimand::Att {
            s.push_str(&format!(" ({})", self.estimand.to_string().to_uppercase()));
        }
        s
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if let Some(m) = self.moments {
            write!(f, " m={m}")?;
        }
        write!(f, " {}", self.estimand)
    }
}

/// Solver settings shared by every fit in a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub eb: EbOptions,
    pub cbps: CbpsOptions,
    pub logit: LogitOptions,
    pub gbm: GbmParams,
    /// Adds pairwise interactions to moment designs.
    pub interactions: bool,
}

/// Weights for one dataset and method.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub method: MethodSpec,
    /// Normalized to sum to one within each treatment group.
    pub weights: Vec<f64>,
    /// Fitted propensity scores; `None` for entropy balancing.
    pub propensity: Option<Vec<f64>>,
    pub converged: bool,
    /// Largest balance-constraint violation (entropy balancing only).
    pub max_violation: Option<f64>,
    pub iterations: usize,
}

/// Fits `method` on covariates `x` (already restricted to the columns to
/// balance). `seed` drives the stochastic parts (GBM subsampling, CBPS
/// restarts).
pub fn estimate_weights(x: &DMatrix<f64>, t: &[bool], method: &MethodSpec, settings: &FitSettings, seed: u64) -> Result<WeightSolution> {
    let estimand = method.estimand;
    let reference = match estimand {
        Estimand::Att => Reference::TreatedUnits(t),
        Estimand::Ate => Reference::AllUnits,
    };
    let columns: Vec<usize> = (0..x.ncols()).collect();
    let design = || build_design(x, &columns, method.design_order(), settings.interactions && method.family.uses_moments(), reference);
    let from_ps = |ps: Vec<f64>, converged: bool, iterations: usize| -> Result<WeightSolution> {
        Ok(WeightSolution {
            method: *method,
            weights: weights_from_propensity(&ps, t, estimand)?,
            propensity: Some(ps),
            converged,
            max_violation: None,
            iterations,
        })
    };
    match method.family {
        MethodFamily::Logit => {
            let d = design()?;
            let model = fit_logistic(&d.values, t, &settings.logit)?;
            from_ps(model.predict_ps(&d.values)?, model.converged, model.iterations)
        }
        MethodFamily::Gbm => {
            let mut rng = rng_for(seed, &[]);
            let mut ens = fit_gbm(x, t, &settings.gbm, &mut rng)?;
            ens.best_iteration = select_iteration(&ens, x, t, estimand)?;
            from_ps(ens.predict_ps(x)?, true, ens.best_iteration)
        }
        MethodFamily::Eb => {
            let d = design()?;
            let sol = entropy_balance_weights(&d.values, t, estimand, &settings.eb)?;
            Ok(WeightSolution {
                method: *method,
                weights: sol.weights,
                propensity: None,
                converged: sol.converged,
                max_violation: Some(sol.max_violation),
                iterations: sol.iterations,
            })
        }
        MethodFamily::CbpsDefault | MethodFamily::CbpsExact => {
            let d = design()?;
            let mode = if method.family == MethodFamily::CbpsDefault {
                CbpsMode::OverIdentified
            } else {
                CbpsMode::JustIdentified
            };
            let opts = CbpsOptions { seed, ..settings.cbps };
            let model = fit_cbps(&d.values, t, estimand, mode, &opts)?;
            from_ps(model.predict_ps(&d.values)?, model.converged, model.iterations)
        }
    }
}
