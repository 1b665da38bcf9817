use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use momentbal::harness::ReportFormat;
use momentbal::{Estimand, MomentOrder};

mod commands;
mod table;

#[derive(Parser)]
#[command(name = "momentbal", version, about = "Balancing weights and Monte Carlo benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation grid and write CSV and markdown reports
    Simulate {
        /// Experiment configuration (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Replications per cell
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated treatment mechanisms, e.g. A,C,G
        #[arg(long, value_delimiter = ',')]
        mechanisms: Option<Vec<String>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads
        #[arg(long, env = "MOMENTBAL_WORKERS")]
        workers: Option<usize>,
        /// Use the full-scale replication count
        #[arg(long)]
        full_scale: bool,
        #[command(flatten)]
        gbm: commands::GbmOverrides,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Estimate weights for one dataset
    Weight {
        /// Input CSV with a header row
        #[arg(long)]
        input: PathBuf,
        /// Name of the 0/1 treatment column
        #[arg(long)]
        treatment: String,
        /// Comma-separated covariate column names
        #[arg(long, value_delimiter = ',', required = true)]
        covariates: Vec<String>,
        #[arg(long, value_enum)]
        method: Family,
        /// Highest covariate power to balance (ignored by logit and gbm)
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
        moments: u8,
        #[arg(long, value_enum, default_value_t = EstimandArg::Att)]
        estimand: EstimandArg,
        /// Seed for GBM subsampling and CBPS restarts
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        gbm: commands::GbmOverrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a results CSV written by `simulate`
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Md)]
        format: FormatArg,
        /// Write to this file instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Logit,
    Gbm,
    Eb,
    CbpsDefault,
    CbpsExact,
}

impl From<Family> for momentbal::harness::MethodFamily {
    fn from(f: Family) -> Self {
        use momentbal::harness::MethodFamily as M;
        match f {
            Family::Logit => M::Logit,
            Family::Gbm => M::Gbm,
            Family::Eb => M::Eb,
            Family::CbpsDefault => M::CbpsDefault,
            Family::CbpsExact => M::CbpsExact,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimandArg {
    Att,
    Ate,
}

impl From<EstimandArg> for Estimand {
    fn from(e: EstimandArg) -> Self {
        match e {
            EstimandArg::Att => Estimand::Att,
            EstimandArg::Ate => Estimand::Ate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Md,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Md => ReportFormat::Markdown,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, reps, mechanisms, seed, workers, full_scale, gbm, out } => {
            commands::simulate(&commands::SimulateArgs { config, reps, mechanisms, seed, workers, full_scale, gbm, out })
        }
        Command::Weight { input, treatment, covariates, method, moments, estimand, seed, gbm, out } => {
            let moments = MomentOrder::try_from(moments).expect("clap restricts the range");
            commands::weight(&commands::WeightRequest {
                input,
                treatment,
                covariates,
                family: method.into(),
                moments,
                estimand: estimand.into(),
                seed,
                gbm,
                out,
            })
        }
        Command::Report { input, format, out } => commands::report(&input, format.into(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
