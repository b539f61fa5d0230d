use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("experiment count must be at least 1")]
    ZeroExperiments,

    #[error("need at least {needed} jobs, got {found}")]
    TooFewJobs { needed: usize, found: usize },

    #[error("{}cell (k={k}, j={j}) has zero total count", job_prefix(*.job))]
    EmptyCell { job: Option<usize>, k: usize, j: usize },

    #[error("leakage model kind mismatch: expected {expected}")]
    LeakageKind { expected: &'static str },

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("invalid noise description: {0}")]
    InvalidNoise(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed document at line {line}, column {column}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown schema_version {found:?} (expected {expected:?})")]
    UnknownSchema { found: String, expected: &'static str },

    #[error("job {job}: missing cell (k={k}, j={j})")]
    MissingCell { job: usize, k: usize, j: usize },

    #[error("job {job}: cell (k={k}, j={j}) {reason}")]
    CellInvariant {
        job: usize,
        k: usize,
        j: usize,
        reason: String,
    },

    #[error("{0}")]
    Document(String),
}

fn job_prefix(job: Option<usize>) -> String {
    job.map(|j| format!("job {j}: ")).unwrap_or_default()
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
