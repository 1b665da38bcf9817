//! Experiment configuration read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::balancers::{CbpsOptions, EbOptions};
use crate::dgp::{CoefficientSet, CovariateSpec, Mechanism, OutcomeModel, ScenarioSpec, Strategy};
use crate::error::{Error, Result};
use crate::harness::{FitSettings, MethodFamily, MethodSpec};
use crate::propensity::{GbmParams, LogitOptions};
use crate::types::{Estimand, MomentOrder};

/// Replications per cell when `full_scale` is set.
pub const FULL_SCALE_REPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGrid {
    pub mechanisms: Vec<Mechanism>,
    pub outcome_models: Vec<u8>,
    pub strategies: Vec<u8>,
    pub n: usize,
    pub target_prevalence: Option<f64>,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        ScenarioGrid {
            mechanisms: Mechanism::ALL.to_vec(),
            outcome_models: (1..=5).collect(),
            strategies: (1..=6).collect(),
            n: 1000,
            target_prevalence: Some(0.5),
        }
    }
}

/// A method family with the moment orders to run it at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub family: MethodFamily,
    #[serde(default)]
    pub moments: Vec<MomentOrder>,
    #[serde(default)]
    pub estimand: Estimand,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub interactions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub eb: EbOptions,
    pub cbps: CbpsOptions,
    pub logit: LogitOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionSection {
    pub seed: u64,
    pub reps: usize,
    /// Worker threads; `None` defers to the environment.
    pub workers: Option<usize>,
    /// Overrides `reps` with the full-scale count.
    pub full_scale: bool,
}

impl Default for ExecutionSection {
    fn default() -> Self {
        ExecutionSection { seed: 20_240_601, reps: 200, workers: None, full_scale: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioGrid,
    pub covariates: CovariateSpec,
    pub coefficients: CoefficientSet,
    pub methods: Vec<MethodEntry>,
    pub design: DesignSection,
    pub solvers: SolverSection,
    pub gbm: GbmParams,
    pub execution: ExecutionSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let all = MomentOrder::ALL.to_vec();
        let entry = |family, moments: &Vec<MomentOrder>| MethodEntry { family, moments: moments.clone(), estimand: Estimand::Att };
        ExperimentConfig {
            scenario: ScenarioGrid::default(),
            covariates: CovariateSpec::default(),
            coefficients: CoefficientSet::default(),
            methods: vec![
                entry(MethodFamily::Logit, &Vec::new()),
                entry(MethodFamily::Gbm, &Vec::new()),
                entry(MethodFamily::Eb, &all),
                entry(MethodFamily::CbpsDefault, &all),
                entry(MethodFamily::CbpsExact, &all),
            ],
            design: DesignSection::default(),
            solvers: SolverSection::default(),
            gbm: GbmParams::default(),
            execution: ExecutionSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.mechanisms.is_empty() || self.scenario.outcome_models.is_empty() || self.scenario.strategies.is_empty() {
            return Err(Error::Config("scenario grid has an empty axis".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if self.reps() == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        if self.execution.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.method_specs()?;
        for spec in self.scenarios()? {
            spec.validate()?;
        }
        self.gbm.validate(self.scenario.n)?;
        Ok(())
    }

    pub fn reps(&self) -> usize {
        if self.execution.full_scale {
            FULL_SCALE_REPS
        } else {
            self.execution.reps
        }
    }

    /// Methods in report order, one per family × moment order.
    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        let mut out = Vec::new();
        for entry in &self.methods {
            if entry.family.uses_moments() {
                if entry.moments.is_empty() {
                    return Err(Error::Config(format!("method `{}` lists no moment orders", entry.family)));
                }
                for &m in &entry.moments {
                    out.push(MethodSpec::new(entry.family, Some(m), entry.estimand)?);
                }
            } else {
                out.push(MethodSpec::new(entry.family, None, entry.estimand)?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Every (mechanism, outcome model, strategy) scenario of the grid.
    pub fn scenarios(&self) -> Result<Vec<ScenarioSpec>> {
        let mut out = Vec::new();
        let mut mechanisms = self.scenario.mechanisms.clone();
        mechanisms.sort();
        mechanisms.dedup();
        for &mechanism in &mechanisms {
            for &k in &self.scenario.outcome_models {
                for &s in &self.scenario.strategies {
                    out.push(ScenarioSpec {
                        mechanism,
                        outcome_model: OutcomeModel::new(k)?,
                        strategy: Strategy::new(s)?,
                        n: self.scenario.n,
                        covariates: self.covariates.clone(),
                        coefficients: self.coefficients.clone(),
                        target_prevalence: self.scenario.target_prevalence,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            eb: self.solvers.eb,
            cbps: self.solvers.cbps,
            logit: self.solvers.logit,
            gbm: self.gbm,
            interactions: self.design.interactions,
        }
    }
}
