//! Learning-free compression of dense retrieval embeddings by spectral
//! tempering, with the usual post-hoc baselines and an exact-search
//! evaluation harness.
//!
//! The pipeline: fit a [`SpectralModel`] on a corpus sample (mean,
//! covariance eigenspectrum, noise floor, SNR profile, knee), build a
//! [`TemperingPlan`] for a target dimension `k`, then apply it to both
//! documents and queries.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod evalhar;
pub mod matio;
pub mod spectral;
pub mod tempering;

pub use error::{Error, Result};
pub use matio::{EmbeddingMatrix, QrelsTable};
pub use spectral::CovarianceSpectrum;
pub use tempering::{build_plan, transform, Compressor, FitConfig, SnrProfile, SpectralModel, TemperingPlan};
