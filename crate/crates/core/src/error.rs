use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable x_{index} is out of range for dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },

    #[error("dimension {dim} exceeds the capacity limit of {limit}")]
    Capacity { dim: usize, limit: usize },

    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("simplification did not reach a fixed point within {passes} passes")]
    IterationCap { passes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Data {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("no valid candidate among {sampled} sampled sequences")]
    NoCandidate { sampled: usize },

    #[error("dataset has {count} binary features after expansion (limit {limit})")]
    TooManyFeatures { count: usize, limit: usize },

    #[error("model failure: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
