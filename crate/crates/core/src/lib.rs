//! Fitness Dependent Optimizer (FDO) and its application to training
//! single-hidden-layer perceptrons.
//!
//! The crate is split along the pipeline:
//!
//! - [`fdo`]: the optimizer itself, a box-constrained stochastic minimizer.
//! - [`bench`]: classical test objectives and a random-search baseline.
//! - [`mlp`]: the network, its flat parameter encoding and forward pass.
//! - [`trainer`]: MSE fitness, FDO-MLP training, a backpropagation baseline.
//! - [`evaluation`]: confusion matrices, metrics, AUC, k-fold cross-validation.
//! - [`dataset`]: CSV ingestion, normalization, splitting, synthetic data.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod fdo;
pub mod mlp;
pub mod trainer;

pub use error::{Error, Result};

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_190_312;
