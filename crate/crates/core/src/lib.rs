//! Mining parallel sentences from comparable corpora with a siamese
//! bidirectional-GRU pair classifier.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod classifier;
pub mod encoder;
pub mod error;
pub mod extractor;
pub mod files;
pub mod ingest;
pub mod kv;
pub mod model;
pub mod ndiff;
pub mod scalar;
pub mod syntheval;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = ndiff::Tensor<f64>;
pub type Tensor32 = ndiff::Tensor<f32>;
pub type Tape64 = ndiff::Tape<f64>;
pub type Tape32 = ndiff::Tape<f32>;
pub type Model64 = model::SiameseModel<f64>;
pub type Model32 = model::SiameseModel<f32>;
pub type Checkpoint64 = trainer::Checkpoint<f64>;
pub type Checkpoint32 = trainer::Checkpoint<f32>;
