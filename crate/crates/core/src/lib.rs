//! Autoencoder-based detection of brown-stained anomalies in
//! immunohistochemistry slides.

pub mod ae;
pub mod colornorm;
pub mod detect;
pub mod error;
pub mod imaging;
pub mod manifest;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Autoencoder with single-precision weights, as stored on disk.
pub type Model = ae::AeModel<f32>;
pub type Tensor32 = ae::Tensor<f32>;
pub type Tensor64 = ae::Tensor<f64>;
