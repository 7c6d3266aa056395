//! Boolean symbolic regression toolkit: formulas, simplification, synthetic
//! data generation, input encoding and the evaluation harnesses that sit on
//! top of any [`Predictor`].

pub mod circuits;
pub mod data;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod formula;
pub mod generator;
pub mod grn;
pub mod metrics;
pub mod predictor;
pub mod rng;
pub mod simplify;
pub mod synthesis;
pub mod tabular;

pub use error::{Error, Result};
pub use data::{Example, NoiseConfig, ObservationSet};
pub use formula::{parse_prefix, Assignment, Formula, Token, TruthTable};
pub use generator::{Generator, GeneratorConfig, Regime, SampleMetadata, SampleSpec};
pub use predictor::{predict, rank, Candidate, Predictor, Proposals};
pub use simplify::simplify;
