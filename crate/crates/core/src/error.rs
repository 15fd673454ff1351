use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RpuError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("dataset '{0}' is empty")]
    EmptyDataset(String),

    #[error("histogram bins do not match")]
    BinMismatch,

    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no evaluable groups (all {0} groups skipped)")]
    NoEvaluableGroups(usize),

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("non-finite value for model '{0}'")]
    NonFinite(String),

    #[error("missing indicators: {0}")]
    MissingIndicators(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("i/o error on {path}: {source}")]
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

pub type Result<T, E = RpuError> = std::result::Result<T, E>;
