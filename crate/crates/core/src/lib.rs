//! Eigenlayer weight decorrelation for retrieval embeddings.
//!
//! The crate trains a small classification network whose penultimate layer
//! (the Eigenlayer) is a bias-free linear map `f = h·W`. Training alternates
//! between replacing `W = U·S·Vᵀ` by `U·S`, fine-tuning with `W` frozen, and
//! fine-tuning with `W` free, until the column-orthogonality score of `W`
//! stabilizes. Retrieval quality is measured with CMC and mAP on held-out
//! identities.
//!
//! Modules:
//! - [`linalg`]: dense matrices, SVD, QR, pairwise distances.
//! - [`decorrelate`]: the five weight-replacement transforms.
//! - [`network`]: the Eigenlayer model, gradients, SGD, checkpoints.
//! - [`diagnostics`]: the gram-matrix orthogonality score and convergence test.
//! - [`trainer`]: step-0 fine-tuning, restraint/relaxation iterations, experiments.
//! - [`eval`]: ranking, CMC/mAP, synthetic datasets.

pub mod config;
pub mod decorrelate;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod trainer;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Result, SvdnetError};
pub use linalg::Matrix;
