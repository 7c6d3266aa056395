//! Transformer model, training loop and decoding for Boolean symbolic
//! regression.

pub mod checkpoint;
pub mod config;
pub mod inference;
pub mod model;
pub mod optim;
pub mod params;
pub mod schedule;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use inference::{DecodeMode, InferenceOptions, ModelPredictor};
pub use model::{EncoderBatch, Memory, Model, TargetBatch};
pub use params::Params;
pub use schedule::LrSchedule;
pub use trainer::{TrainConfig, Trainer};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("tensor error: {0}")]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Core(#[from] logicsr_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("sequence of length {len} exceeds the limit of {limit}")]
    Length { len: usize, limit: usize },
    #[error("non-finite loss at step {step}; snapshot written to {snapshot}")]
    NonFinite { step: u64, snapshot: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

impl From<ModelError> for logicsr_core::Error {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Core(e) => e,
            other => logicsr_core::Error::Model(other.to_string()),
        }
    }
}
