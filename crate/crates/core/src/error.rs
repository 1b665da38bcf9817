use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),

    #[error("intercept calibration failed: {0}")]
    Calibration(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate column `{column}`: constant over the reference units")]
    DegenerateColumn { column: String },

    #[error("treatment vector contains a single class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entropy balancing target is infeasible: {0}")]
    InfeasibleTarget(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("data error at row {row}, column `{column}`: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: missing columns {}", missing.join(", "))]
    Schema { missing: Vec<String> },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
