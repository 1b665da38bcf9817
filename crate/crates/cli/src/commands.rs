use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use momentbal::config::ExperimentConfig;
use momentbal::dgp::Mechanism;
use momentbal::estimator::{effective_sample_size, es_mean, std_mean_diff, SmdDenominator};
use momentbal::harness::{
    estimate_weights, read_report_csv, render_markdown, resolve_workers, run_grid, write_csv, write_report, FitSettings,
    MethodFamily, MethodSpec, ReportFormat,
};
use momentbal::propensity::GbmParams;
use momentbal::{Estimand, MomentOrder};

use crate::table::InputTable;

/// Bad invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

/// Boosting hyperparameters; unset flags keep the configured values.
#[derive(Debug, Default, clap::Args)]
pub struct GbmOverrides {
    /// Maximum number of boosting iterations
    #[arg(long)]
    pub gbm_trees: Option<usize>,
    #[arg(long)]
    pub gbm_depth: Option<usize>,
    #[arg(long)]
    pub gbm_shrinkage: Option<f64>,
    /// Minimum observations per terminal node
    #[arg(long)]
    pub gbm_min_node: Option<usize>,
    /// Fraction of units drawn for each tree
    #[arg(long)]
    pub gbm_subsample: Option<f64>,
}

impl GbmOverrides {
    pub fn apply(&self, p: &mut GbmParams) {
        if let Some(v) = self.gbm_trees {
            p.max_trees = v;
        }
        if let Some(v) = self.gbm_depth {
            p.depth = v;
        }
        if let Some(v) = self.gbm_shrinkage {
            p.shrinkage = v;
        }
        if let Some(v) = self.gbm_min_node {
            p.min_node = v;
        }
        if let Some(v) = self.gbm_subsample {
            p.subsample = v;
        }
    }
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub reps: Option<usize>,
    pub mechanisms: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub full_scale: bool,
    pub gbm: GbmOverrides,
    pub out: PathBuf,
}

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_MD: &str = "results.md";

fn load_config(args: &SimulateArgs) -> std::result::Result<ExperimentConfig, UsageError> {
    let usage = |e: momentbal::Error| UsageError(format!("invalid configuration {}: {e}", args.config.display()));
    let mut cfg = ExperimentConfig::from_path(&args.config).map_err(usage)?;
    if let Some(r) = args.reps {
        cfg.execution.reps = r;
        cfg.execution.full_scale = false;
    }
    if args.full_scale {
        cfg.execution.full_scale = true;
    }
    if let Some(list) = &args.mechanisms {
        cfg.scenario.mechanisms = list
            .iter()
            .map(|m| m.parse::<Mechanism>())
            .collect::<momentbal::Result<_>>()
            .map_err(|e| UsageError(format!("--mechanisms: {e}")))?;
    }
    if let Some(s) = args.seed {
        cfg.execution.seed = s;
    }
    if args.workers.is_some() {
        cfg.execution.workers = args.workers;
    }
    args.gbm.apply(&mut cfg.gbm);
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let workers = resolve_workers(cfg.execution.workers).map_err(|e| UsageError(e.to_string()))?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let report = run_grid(&cfg, workers)?;
    let csv_path = args.out.join(RESULTS_CSV);
    let md_path = args.out.join(RESULTS_MD);
    write_report(&report, &csv_path, ReportFormat::Csv)?;
    write_report(&report, &md_path, ReportFormat::Markdown)?;
    let low: Vec<String> = report
        .cells
        .iter()
        .filter(|c| c.converged_fraction < 0.95)
        .map(|c| format!("{} model {} strategy {} {}: {:.1}%", c.mechanism, c.outcome_model, c.strategy, c.method, 100.0 * c.converged_fraction))
        .collect();
    for line in &low {
        eprintln!("warning: low convergence in {line}");
    }
    println!("{} cells, {} replications each, {} workers", report.cells.len(), cfg.reps(), workers);
    println!("wrote {} and {}", csv_path.display(), md_path.display());
    Ok(())
}

pub struct WeightRequest {
    pub input: PathBuf,
    pub treatment: String,
    pub covariates: Vec<String>,
    pub family: MethodFamily,
    pub moments: MomentOrder,
    pub estimand: Estimand,
    pub seed: u64,
    pub gbm: GbmOverrides,
    pub out: PathBuf,
}

pub fn weight(req: &WeightRequest) -> Result<()> {
    let table = InputTable::read(&req.input)?;
    let mut needed: Vec<&str> = vec![req.treatment.as_str()];
    needed.extend(req.covariates.iter().map(String::as_str));
    table.require(&needed)?;
    let t = table.binary(&req.treatment)?;
    let x = table.matrix(&req.covariates)?;
    if !t.iter().any(|&b| b) || t.iter().all(|&b| b) {
        bail!("treatment column `{}` must contain both 0 and 1", req.treatment);
    }

    let method = MethodSpec::new(req.family, Some(req.moments), req.estimand)?;
    let mut settings = FitSettings::default();
    req.gbm.apply(&mut settings.gbm);
    settings.gbm.validate(t.len()).map_err(|e| UsageError(e.to_string()))?;
    let fit = estimate_weights(&x, &t, &method, &settings, req.seed)?;
    if !fit.converged {
        eprintln!("warning: {method} did not converge; weights are from the last iterate");
    }
    write_weights(&table, &fit.weights, fit.propensity.as_deref(), &req.out)?;
    print_diagnostics(&req.covariates, &x, &t, &fit.weights, req.estimand)?;
    Ok(())
}

fn write_weights(table: &InputTable, w: &[f64], ps: Option<&[f64]>, out: &Path) -> Result<()> {
    let mut wr = csv::Writer::from_path(out).with_context(|| format!("cannot write {}", out.display()))?;
    let mut header = table.headers.clone();
    header.push_field("weight");
    header.push_field("propensity");
    wr.write_record(&header)?;
    for (i, row) in table.rows.iter().enumerate() {
        let mut rec = row.clone();
        rec.push_field(&w[i].to_string());
        rec.push_field(&ps.map_or(String::new(), |p| p[i].to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush().with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}

fn print_diagnostics(names: &[String], x: &momentbal::nalgebra::DMatrix<f64>, t: &[bool], w: &[f64], estimand: Estimand) -> Result<()> {
    let denom = match estimand {
        Estimand::Att => SmdDenominator::TreatedSd,
        Estimand::Ate => SmdDenominator::PooledSd,
    };
    let uniform = vec![1.0; t.len()];
    let cols: Vec<Vec<f64>> = x.column_iter().map(|c| c.iter().copied().collect()).collect();
    let width = names.iter().map(String::len).max().unwrap_or(0).max(9);
    println!("{:<width$}  {:>11}  {:>11}", "covariate", "smd_before", "smd_after");
    let mut assessable = Vec::new();
    for (name, c) in names.iter().zip(&cols) {
        match (std_mean_diff(c, t, &uniform, denom), std_mean_diff(c, t, w, denom)) {
            (Ok(before), Ok(after)) => {
                println!("{name:<width$}  {before:>11.6}  {after:>11.6}");
                assessable.push(c.clone());
            }
            _ => println!("{name:<width$}  {:>11}  {:>11}", "n/a", "n/a"),
        }
    }
    if !assessable.is_empty() {
        println!(
            "{:<width$}  {:>11.6}  {:>11.6}",
            "es-mean",
            es_mean(&assessable, t, &uniform, denom)?,
            es_mean(&assessable, t, w, denom)?
        );
    }
    let group = |keep: bool| -> Vec<f64> { w.iter().zip(t).filter(|(_, &ti)| ti == keep).map(|(&v, _)| v).collect() };
    println!("ess treated {:.2}, ess control {:.2}", effective_sample_size(&group(true))?, effective_sample_size(&group(false))?);
    Ok(())
}

pub fn report(input: &Path, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    let report = read_report_csv(input)?;
    if report.cells.is_empty() {
        eprintln!("warning: {} has no result rows", input.display());
    }
    let text = match format {
        ReportFormat::Markdown => render_markdown(&report.table),
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(&report.cells, &mut buf)?;
            String::from_utf8(buf).expect("CSV output is UTF-8")
        }
    };
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
