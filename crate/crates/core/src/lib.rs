//! Sequential recommendation with a self-attention encoder whose attention
//! output is mixed with a learnable frequency rescaler.
//!
//! Modules, bottom-up:
//! - [`signal`]: DFT / Haar decompositions, band split, rescaler, padding and
//!   the scaled-DC history-frequency metric.
//! - [`data`]: corpus parsing, vocabulary, leave-last-out splits and windowing.
//! - [`model`]: the encoder with hand-written forward and backward passes.
//! - [`training`]: Adam, early stopping and the finite-difference gradient checker.
//! - [`eval`]: full ranking, HR/NDCG, quartile grouping and Welch's t-test.
//! - [`experiment`]: config documents and the seed loop shared by the CLI.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod signal;
pub mod training;

pub use error::{Error, Result};
