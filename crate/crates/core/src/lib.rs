//! Code generation grounded in API documentation.
//!
//! An intent is matched against a document set of signature/description pairs
//! ([`docstore`]), the retrieved signatures are read and aligned to their
//! descriptions, and an encoder-decoder with a copy mechanism emits the snippet,
//! copying symbols from the intent or the signatures ([`model`]). [`corpus`]
//! handles data, vocabularies and the library split; [`evaltrain`] holds the
//! training loop and the BLEU / OOV-recall metrics.

pub mod corpus;
pub mod docstore;
pub mod error;
pub mod evaltrain;
pub mod model;
pub mod neural;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision model (gradient checks, reference runs).
pub type Model64 = model::Model<f64>;
/// Single-precision model.
pub type Model32 = model::Model<f32>;
pub type Graph64<'p> = neural::Graph<'p, f64>;
pub type ParamStore64 = neural::ParamStore<f64>;
pub type Tensor64 = neural::Tensor<f64>;
