use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("source and target domains share no users")]
    NoOverlap,
    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),
    #[error("only {0} candidate items available for negative sampling")]
    InsufficientCandidates(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("no overlapping users available for mapping training")]
    NoOverlapUsers,
    #[error("empty candidate list")]
    EmptyCandidates,
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("test item {0} missing from scores")]
    MissingTestItem(usize),
    #[error("scorer failed for user {0}")]
    ScorerFailure(String),
    #[error("infeasible density: {0}")]
    InfeasibleDensity(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Coarse failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::NonFiniteInput | Error::NonFiniteLoss { .. } | Error::DimensionMismatch { .. } => {
                ErrorClass::Numeric
            }
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
