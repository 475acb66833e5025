use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CodaError>;

#[derive(Debug, Error)]
pub enum CodaError {
    #[error("entry {index} is not strictly positive ({value})")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("dimension {dim} is below the minimum of {min}")]
    DimensionTooSmall { dim: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("{rows} rows supplied, at least {min} required")]
    TooFewRows { rows: usize, min: usize },

    #[error("eigen-solver did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("invalid degrees of freedom: {df}")]
    InvalidDf { df: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("row {row}: {detail}")]
    InconsistentZeroPattern { row: usize, detail: String },

    #[error("the {block} block is empty")]
    EmptyBlock { block: &'static str },

    #[error("negative entry at row {row}, column {column}")]
    NegativeEntry { row: usize, column: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("subspace size k = {k} outside 1..={max}")]
    BadK { k: usize, max: usize },

    #[error("degenerate eigengap in {which}: lambda_{i} - lambda_{j} = {gap:e}")]
    DegenerateEigengap {
        which: &'static str,
        i: usize,
        j: usize,
        gap: f64,
    },

    #[error("null approximation invalid: mu_T = {mu_t:e}, sigma2_T = {sigma2_t:e}")]
    ApproximationInvalid { mu_t: f64, sigma2_t: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl CodaError {
    /// Stable variant name, printed by the CLI on failure.
    pub fn kind(&self) -> &'static str {
        match self {
            CodaError::NonPositiveEntry { .. } => "NonPositiveEntry",
            CodaError::DimensionTooSmall { .. } => "DimensionTooSmall",
            CodaError::DimensionMismatch { .. } => "DimensionMismatch",
            CodaError::NonFinite { .. } => "NonFinite",
            CodaError::TooFewRows { .. } => "TooFewRows",
            CodaError::ConvergenceFailure { .. } => "ConvergenceFailure",
            CodaError::InvalidDf { .. } => "InvalidDf",
            CodaError::InvalidArgument(_) => "InvalidArgument",
            CodaError::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            CodaError::InconsistentZeroPattern { .. } => "InconsistentZeroPattern",
            CodaError::EmptyBlock { .. } => "EmptyBlock",
            CodaError::NegativeEntry { .. } => "NegativeEntry",
            CodaError::Parse { .. } => "ParseError",
            CodaError::Io { .. } => "IoError",
            CodaError::BadK { .. } => "BadK",
            CodaError::DegenerateEigengap { .. } => "DegenerateEigengap",
            CodaError::ApproximationInvalid { .. } => "ApproximationInvalid",
            CodaError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
