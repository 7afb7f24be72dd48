//! Adaptive spectral tempering.
//!
//! From a fitted covariance spectrum this module estimates a noise floor
//! (mean of the trailing eigenvalues), turns every eigenvalue into a local
//! SNR, anchors the SNR curve at its knee, and derives the per-dimension
//! exponent `gamma(k) = min(1, snr(k) / snr(k_knee))`. Projection plans
//! then scale the top-k eigenvectors by `lambda^(-gamma/2)`.

mod kneedle;
mod plan;

pub use kneedle::{detect_knee, SENSITIVITY as KNEEDLE_SENSITIVITY};
pub(crate) use plan::dot4;
pub use plan::{build_plan, transform, Compressor, TemperingPlan};

use crate::error::{Error, Result};
use crate::matio::EmbeddingMatrix;
use crate::spectral::{fit_spectrum, CovarianceSpectrum};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.10;
pub const DEFAULT_SAMPLE_CAP: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 1999;

/// Reference SNR at or below this value disables whitening entirely.
pub const REFERENCE_SNR_EPS: f64 = 1e-12;

/// Number of trailing eigenvalues averaged into the noise floor.
pub fn tail_size(dim: usize, tail_fraction: f64) -> usize {
    // the small offset keeps products like 0.1 * 30 = 3.0000000000000004 at 3
    let raw = (tail_fraction * dim as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(dim)
}

pub fn validate_tail_fraction(tail_fraction: f64) -> Result<()> {
    if tail_fraction.is_finite() && tail_fraction > 0.0 && tail_fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "tail fraction must lie in (0, 1), got {tail_fraction}"
        )))
    }
}

/// Mean of the last `ceil(tail_fraction * d)` eigenvalues of a descending
/// spectrum.
pub fn noise_floor(eigenvalues: &[f64], tail_fraction: f64) -> Result<f64> {
    validate_tail_fraction(tail_fraction)?;
    let d = eigenvalues.len();
    if d < 2 {
        return Err(Error::Degenerate(format!(
            "noise floor needs at least 2 eigenvalues, got {d}"
        )));
    }
    let t = tail_size(d, tail_fraction);
    Ok(eigenvalues[d - t..].iter().sum::<f64>() / t as f64)
}

/// Per-rank SNR `max(0, (lambda - floor) / floor)`.
///
/// With a zero floor the ratio is replaced by `lambda / lambda_min_pos`
/// (smallest positive eigenvalue) so the profile stays finite and
/// monotone; zero eigenvalues map to zero.
pub fn snr_profile(eigenvalues: &[f64], noise_floor: f64) -> Vec<f64> {
    if noise_floor > 0.0 {
        return eigenvalues
            .iter()
            .map(|&l| ((l - noise_floor) / noise_floor).max(0.0))
            .collect();
    }
    let min_pos = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > 0.0)
        .fold(f64::INFINITY, f64::min);
    eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { l / min_pos } else { 0.0 })
        .collect()
}

/// `min(1, snr(k) / snr(k_knee))` with 1-based `k` and `k_knee`; zero when
/// the reference SNR vanishes.
pub fn derive_gamma(snr: &[f64], knee: usize, k: usize) -> Result<f64> {
    let d = snr.len();
    check_rank(k, d)?;
    check_rank(knee, d)?;
    Ok(gamma_from_reference(snr[k - 1], snr[knee - 1]))
}

fn gamma_from_reference(snr_k: f64, reference: f64) -> f64 {
    if reference <= REFERENCE_SNR_EPS {
        0.0
    } else {
        (snr_k / reference).min(1.0)
    }
}

pub(crate) fn check_rank(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        Err(Error::Config(format!(
            "target dimension {k} outside [1, {d}]"
        )))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrProfile {
    pub noise_floor: f64,
    pub snr: Vec<f64>,
    pub tail_fraction: f64,
    /// 1-based knee rank; `None` when the spectrum has fewer than three
    /// positive SNR values, in which case every gamma is 0.
    pub knee_index: Option<usize>,
    /// SNR at the knee (0 when there is no knee).
    pub reference_snr: f64,
}

impl SnrProfile {
    pub fn from_eigenvalues(eigenvalues: &[f64], tail_fraction: f64) -> Result<Self> {
        let floor = noise_floor(eigenvalues, tail_fraction)?;
        let snr = snr_profile(eigenvalues, floor);
        let knee_index = match detect_knee(&snr) {
            Ok(k) => Some(k),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        let reference_snr = knee_index.map_or(0.0, |k| snr[k - 1]);
        Ok(Self {
            noise_floor: floor,
            snr,
            tail_fraction,
            knee_index,
            reference_snr,
        })
    }

    pub fn gamma(&self, k: usize) -> Result<f64> {
        check_rank(k, self.snr.len())?;
        Ok(gamma_from_reference(self.snr[k - 1], self.reference_snr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub tail_fraction: f64,
    pub sample_cap: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            sample_cap: DEFAULT_SAMPLE_CAP,
            seed: DEFAULT_SEED,
        }
    }
}

/// A fitted spectrum plus its SNR analysis; everything needed to build
/// projection plans for any target dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    pub spectrum: CovarianceSpectrum,
    pub profile: SnrProfile,
    pub sample_cap: usize,
}

impl SpectralModel {
    pub fn fit(corpus: &EmbeddingMatrix, config: &FitConfig) -> Result<Self> {
        validate_tail_fraction(config.tail_fraction)?;
        let spectrum = fit_spectrum(corpus, config.sample_cap, config.seed)?;
        Self::from_spectrum(spectrum, config.tail_fraction, config.sample_cap)
    }

    pub fn from_spectrum(
        spectrum: CovarianceSpectrum,
        tail_fraction: f64,
        sample_cap: usize,
    ) -> Result<Self> {
        let profile = SnrProfile::from_eigenvalues(&spectrum.eigenvalues, tail_fraction)?;
        Ok(Self {
            spectrum,
            profile,
            sample_cap,
        })
    }

    /// Same spectrum, SNR analysis redone with another tail fraction.
    pub fn with_tail_fraction(&self, tail_fraction: f64) -> Result<Self> {
        Self::from_spectrum(self.spectrum.clone(), tail_fraction, self.sample_cap)
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn gamma(&self, k: usize) -> Result<f64> {
        self.profile.gamma(k)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            tail_fraction: self.profile.tail_fraction,
            sample_cap: self.sample_cap,
            seed: self.spectrum.sample_seed,
        }
    }
}
