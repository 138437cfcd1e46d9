use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("undefined group rate: group {0} is empty")]
    EmptyGroup(crate::Group),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid value for {what}: {detail}")]
    InvalidValue { what: &'static str, detail: String },

    #[error("labels contain a single class; FNR/FPR undefined")]
    SingleClassLabels,

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("dimension mismatch: model expects {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gradient descent did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("penalty schedule ended with covariance {achieved:e}, bound is {bound:e}")]
    BoundNotReached { achieved: f64, bound: f64 },

    #[error("target unreachable: best achievable gap is {best_gap}")]
    Unreachable { best_gap: f64 },

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("unsupported target for this operation: {0}")]
    UnsupportedTarget(String),

    #[error("no separating threshold: probability {value} appears on both sides of the cut in group {group}")]
    DuplicateStraddle { value: f64, group: crate::Group },

    #[error("instance too large for exhaustive search: {size} exceeds {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("cannot parse `{value}` in column `{column}` (line {line})")]
    Unparseable {
        column: String,
        value: String,
        line: usize,
    },

    #[error("dataset is empty after loading")]
    EmptyDataset,

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported document: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidValue {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, expected, got })
    }
}
