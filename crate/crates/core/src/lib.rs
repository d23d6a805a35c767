//! Pool-based active learning on messy pools.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, seeded streams, a small MLP with explicit
//!   backpropagation, Adam, and a finite-difference gradient checker.
//! - [`datasets`]: IDX/CSV loaders, a synthetic messy generator, and pool
//!   construction with controlled imbalance and redundant classes.
//! - [`representations`]: identity, PCA, split-latent semi-supervised VAE, and
//!   autoencoder-pretrained fine-tuned encoders.
//! - [`heads`]: stochastic prediction heads (random forest, Laplace MLP).
//! - [`acquisition`]: EPIG, BALD, confidence and random scoring plus power
//!   batch selection.
//! - [`engine`]: the acquisition loop with periodic encoder retraining.
//! - [`cli`]: experiment configs, runs, sweeps and SVG learning curves.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod cli;
pub mod datasets;
pub mod engine;
mod error;
pub mod heads;
pub mod numerics;
pub mod representations;

pub use error::{Error, Result};
