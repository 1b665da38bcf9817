//! Monte Carlo replication grid: simulate, weight, estimate, aggregate.

mod method;
pub mod report;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::dgp::{
    draw_covariates_and_treatment, draw_outcome, resolve_intercept, strategy_columns, Mechanism, ScenarioSpec,
};
use crate::error::{Error, Result};
use crate::estimator::stabilized_effect;
use crate::seed::{derive_seed, stream};

pub use method::{estimate_weights, FitSettings, MethodFamily, MethodSpec, WeightSolution};
pub use report::{read_report_csv, render_markdown, write_csv, write_report, ReportFormat, CSV_HEADER};

/// Environment variable consulted for the worker count when none is given.
pub const WORKERS_ENV: &str = "MOMENTBAL_WORKERS";

/// Outcome of one replication of one method on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep: u64,
    /// `None` when the weights did not converge or the replication failed.
    pub tau_hat: Option<f64>,
    pub theta: f64,
    pub converged: bool,
    pub ess_treated: Option<f64>,
    pub ess_control: Option<f64>,
    pub max_violation: Option<f64>,
    /// Error message for failed replications.
    pub failure: Option<String>,
}

impl ReplicationRecord {
    fn failed(rep: u64, theta: f64, err: &Error) -> Self {
        ReplicationRecord {
            rep,
            tau_hat: None,
            theta,
            converged: false,
            ess_treated: None,
            ess_control: None,
            max_violation: None,
            failure: Some(err.to_string()),
        }
    }
}

/// Seed for the stochastic parts of a weight fit, keyed on everything that
/// identifies the fit except the outcome model.
fn fit_seed(master_seed: u64, spec: &ScenarioSpec, method: &MethodSpec, rep: u64) -> u64 {
    let family_tag = match method.family {
        MethodFamily::Gbm => stream::GBM,
        _ => stream::CBPS,
    };
    derive_seed(
        master_seed,
        &[
            family_tag,
            spec.mechanism.index(),
            u64::from(spec.strategy.get()),
            method.family as u64,
            method.moments.map_or(0, |m| u64::from(m.get())),
            method.estimand as u64,
            rep,
        ],
    )
}

/// Weights for one replication, shared by every outcome model.
fn fit_replication(
    spec: &ScenarioSpec,
    x: &DMatrix<f64>,
    t: &[bool],
    method: &MethodSpec,
    settings: &FitSettings,
    master_seed: u64,
    rep: u64,
) -> Result<WeightSolution> {
    let correlation = spec.covariates.correlation_matrix();
    let roles = crate::dgp::default_roles(x.ncols());
    let columns = strategy_columns(spec.strategy, &roles, correlation.as_ref());
    let x_sub = x.select_columns(&columns);
    estimate_weights(&x_sub, t, method, settings, fit_seed(master_seed, spec, method, rep))
}

fn record_from(rep: u64, theta: f64, y: &[f64], t: &[bool], fit: &WeightSolution) -> ReplicationRecord {
    if !fit.converged {
        return ReplicationRecord {
            rep,
            tau_hat: None,
            theta,
            converged: false,
            ess_treated: None,
            ess_control: None,
            max_violation: fit.max_violation,
            failure: None,
        };
    }
    match stabilized_effect(y, t, &fit.weights) {
        Ok(e) => ReplicationRecord {
            rep,
            tau_hat: Some(e.tau_hat),
            theta,
            converged: true,
            ess_treated: Some(e.ess_treated),
            ess_control: Some(e.ess_control),
            max_violation: fit.max_violation,
            failure: None,
        },
        Err(err) => ReplicationRecord::failed(rep, theta, &err),
    }
}

/// Simulates replication `rep` of `spec`, fits `method` and estimates the
/// effect. Deterministic in its arguments; solver and data failures are
/// returned as non-converged records.
pub fn run_replication(
    spec: &ScenarioSpec,
    method: &MethodSpec,
    settings: &FitSettings,
    rep: u64,
    master_seed: u64,
) -> Result<ReplicationRecord> {
    spec.validate()?;
    let alpha0 = resolve_intercept(spec, master_seed)?;
    Ok(replicate(spec, alpha0, method, settings, std::slice::from_ref(spec), rep, master_seed).remove(0))
}

/// One replication of `method` for every outcome-model variant in
/// `outcomes` (which share mechanism and strategy with `spec`).
fn replicate(
    spec: &ScenarioSpec,
    alpha0: f64,
    method: &MethodSpec,
    settings: &FitSettings,
    outcomes: &[ScenarioSpec],
    rep: u64,
    master_seed: u64,
) -> Vec<ReplicationRecord> {
    let theta = spec.coefficients.theta;
    let (x, t) = match draw_covariates_and_treatment(spec, alpha0, master_seed, rep) {
        Ok(v) => v,
        Err(e) => return outcomes.iter().map(|_| ReplicationRecord::failed(rep, theta, &e)).collect(),
    };
    let fit = fit_replication(spec, &x, &t, method, settings, master_seed, rep);
    outcomes
        .iter()
        .map(|o| {
            let fit = match &fit {
                Ok(f) => f,
                Err(e) => return ReplicationRecord::failed(rep, o.coefficients.theta, e),
            };
            match draw_outcome(o, &x, &t, master_seed, rep) {
                Ok(y) => record_from(rep, o.coefficients.theta, &y, &t, fit),
                Err(e) => ReplicationRecord::failed(rep, o.coefficients.theta, &e),
            }
        })
        .collect()
}

/// Summary of one (scenario, method) cell over its replications.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub mechanism: Mechanism,
    pub outcome_model: u8,
    pub strategy: u8,
    pub method: MethodSpec,
    pub n_reps: usize,
    /// `|mean(τ̂) − θ|` over converged replications.
    pub abs_bias: f64,
    /// `mean|τ̂ − θ|`.
    pub mae: f64,
    pub rmse: f64,
    pub mean_ess_treated: f64,
    pub mean_ess_control: f64,
    pub converged_fraction: f64,
    /// Standard error of `mean(τ̂)`.
    pub mc_se: f64,
}

impl CellResult {
    /// Summarises `records`; non-converged replications count only towards
    /// `converged_fraction`.
    pub fn from_records(spec: &ScenarioSpec, method: MethodSpec, records: &[ReplicationRecord]) -> Self {
        let theta = spec.coefficients.theta;
        let est: Vec<f64> = records.iter().filter_map(|r| r.tau_hat).collect();
        let k = est.len() as f64;
        let mean = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>() / k;
        let tau_bar = mean(&mut est.iter().copied());
        let var = if est.len() > 1 {
            est.iter().map(|e| (e - tau_bar).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            f64::NAN
        };
        CellResult {
            mechanism: spec.mechanism,
            outcome_model: spec.outcome_model.get(),
            strategy: spec.strategy.get(),
            method,
            n_reps: records.len(),
            abs_bias: (tau_bar - theta).abs(),
            mae: mean(&mut est.iter().map(|e| (e - theta).abs())),
            rmse: mean(&mut est.iter().map(|e| (e - theta).powi(2))).sqrt(),
            mean_ess_treated: mean(&mut records.iter().filter_map(|r| r.tau_hat.and(r.ess_treated))),
            mean_ess_control: mean(&mut records.iter().filter_map(|r| r.tau_hat.and(r.ess_control))),
            converged_fraction: if records.is_empty() { 0.0 } else { k / records.len() as f64 },
            mc_se: (var / k).sqrt(),
        }
    }
}

/// One row of the mechanism-level table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub mechanism: Mechanism,
    /// Per method: mean abs_bias, mean mae, mean rmse over the row's cells.
    pub entries: Vec<(MethodSpec, TableEntry)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub abs_bias: f64,
    pub mae: f64,
    pub rmse: f64,
    pub n_cells: usize,
}

/// Averages cells over outcome models and strategies for each mechanism
/// and method. Rows follow mechanism order, entries method order.
pub fn aggregate_table(cells: &[CellResult]) -> Vec<TableRow> {
    // (abs_bias, mae, rmse) sums and the cell count.
    type Sums = (f64, f64, f64, usize);
    let mut acc: BTreeMap<Mechanism, BTreeMap<MethodSpec, Sums>> = BTreeMap::new();
    for c in cells {
        let e = acc.entry(c.mechanism).or_default().entry(c.method).or_insert((0.0, 0.0, 0.0, 0));
        e.0 += c.abs_bias;
        e.1 += c.mae;
        e.2 += c.rmse;
        e.3 += 1;
    }
    acc.into_iter()
        .map(|(mechanism, methods)| TableRow {
            mechanism,
            entries: methods
                .into_iter()
                .map(|(m, (b, a, r, k))| {
                    let k_f = k as f64;
                    (m, TableEntry { abs_bias: b / k_f, mae: a / k_f, rmse: r / k_f, n_cells: k })
                })
                .collect(),
        })
        .collect()
}

/// Results of a grid run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Ordered by mechanism, outcome model, strategy, method.
    pub cells: Vec<CellResult>,
    pub table: Vec<TableRow>,
}

impl SimReport {
    pub fn from_cells(mut cells: Vec<CellResult>) -> Self {
        cells.sort_by(|a, b| {
            (a.mechanism, a.outcome_model, a.strategy, a.method).cmp(&(b.mechanism, b.outcome_model, b.strategy, b.method))
        });
        let table = aggregate_table(&cells);
        SimReport { cells, table }
    }

    pub fn cell(&self, mechanism: Mechanism, outcome_model: u8, strategy: u8, method: &MethodSpec) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.mechanism == mechanism && c.outcome_model == outcome_model && c.strategy == strategy && c.method == *method)
    }

    /// Mechanism-level entry from the aggregated table.
    pub fn entry(&self, mechanism: Mechanism, method: &MethodSpec) -> Option<TableEntry> {
        self.table
            .iter()
            .find(|r| r.mechanism == mechanism)?
            .entries
            .iter()
            .find(|(m, _)| m == method)
            .map(|(_, e)| *e)
    }
}

/// Worker count: explicit value, else the environment variable, else the
/// available parallelism.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(w) = explicit {
        return if w == 0 { Err(Error::Config("workers must be positive".into())) } else { Ok(w) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs every (scenario, method) cell of `config` for `config.reps()`
/// replications on a pool of `workers` threads.
///
/// Covariates and treatment are drawn once per (mechanism, replication) and
/// the weights once per (mechanism, strategy, method, replication); the
/// outcome models reuse them. Results do not depend on the worker count.
pub fn run_grid(config: &ExperimentConfig, workers: usize) -> Result<SimReport> {
    config.validate()?;
    let methods = config.method_specs()?;
    let scenarios = config.scenarios()?;
    let settings = config.fit_settings();
    let seed = config.execution.seed;
    let reps = config.reps() as u64;

    // Group scenarios by (mechanism, strategy); the rest differ only in outcome model.
    let mut groups: BTreeMap<(Mechanism, u8), Vec<ScenarioSpec>> = BTreeMap::new();
    for s in scenarios {
        groups.entry((s.mechanism, s.strategy.get())).or_default().push(s);
    }
    let mut intercepts = BTreeMap::new();
    for &(mechanism, _) in groups.keys() {
        if let std::collections::btree_map::Entry::Vacant(e) = intercepts.entry(mechanism) {
            let spec = &groups.iter().find(|(k, _)| k.0 == mechanism).expect("group exists").1[0];
            e.insert(resolve_intercept(spec, seed)?);
        }
    }

    let mut items = Vec::new();
    for (key, outcomes) in &groups {
        for method in &methods {
            for rep in 0..reps {
                items.push((key, outcomes, method, rep));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Vec<ReplicationRecord>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(key, outcomes, method, rep)| {
                replicate(&outcomes[0], intercepts[&key.0], method, &settings, outcomes, rep, seed)
            })
            .collect()
    });

    let mut per_cell: BTreeMap<(usize, usize, usize), Vec<ReplicationRecord>> = BTreeMap::new();
    let group_list: Vec<_> = groups.values().collect();
    let mut it = results.into_iter();
    for (g, outcomes) in group_list.iter().enumerate() {
        for (m, _) in methods.iter().enumerate() {
            for _ in 0..reps {
                let recs = it.next().expect("one result per work item");
                for (o, r) in recs.into_iter().enumerate() {
                    per_cell.entry((g, m, o)).or_default().push(r);
                }
            }
            let _ = outcomes;
        }
    }

    let cells = per_cell
        .into_iter()
        .map(|((g, m, o), recs)| CellResult::from_records(&group_list[g][o], methods[m], &recs))
        .collect();
    Ok(SimReport::from_cells(cells))
}
