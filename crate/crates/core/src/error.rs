use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PscError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PscError {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("columns are not orthonormal (||U'U - I||_F = {drift:e})")]
    NotOrthonormal { drift: f64 },

    #[error("no complement: subspace dimension equals ambient dimension {m}")]
    NoComplement { m: usize },

    #[error("invalid subspace dimension k={k} for ambient dimension m={m}")]
    InvalidDimension { k: usize, m: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("posterior chain is empty")]
    EmptyChain,

    #[error("chain draws have mixed ambient dimension ({0} vs {1})")]
    MixedDimension(usize, usize),

    #[error("AUC is defined for binary problems only (got {0} classes)")]
    BinaryOnly(usize),

    #[error("input is not on the training scale: {0}")]
    Unstandardized(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("impossible stratification: {0}")]
    Stratification(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: malformed row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("non-finite log joint density at iteration {iter}; state: {dump}")]
    NonFiniteLogJoint { iter: usize, dump: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
