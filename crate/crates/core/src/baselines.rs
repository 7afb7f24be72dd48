//! Comparison compressors: prefix and random truncation, Gaussian random
//! projection, and the fixed-exponent spectral methods (PCA, whitening,
//! fixed-gamma whitening), which are thin wrappers over [`build_plan`].

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matio::EmbeddingMatrix;
use crate::tempering::{build_plan, dot4, transform, Compressor, SpectralModel};

pub const DEFAULT_FIXED_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineKind {
    PrefixTruncate,
    RandomTruncate,
    RandomProject,
    Pca,
    Whitening,
    FixedGamma,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::PrefixTruncate,
        BaselineKind::RandomTruncate,
        BaselineKind::RandomProject,
        BaselineKind::Pca,
        BaselineKind::Whitening,
        BaselineKind::FixedGamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::PrefixTruncate => "prefix_truncate",
            BaselineKind::RandomTruncate => "random_truncate",
            BaselineKind::RandomProject => "random_project",
            BaselineKind::Pca => "pca",
            BaselineKind::Whitening => "whitening",
            BaselineKind::FixedGamma => "fixed_gamma",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(
            self,
            BaselineKind::Pca | BaselineKind::Whitening | BaselineKind::FixedGamma
        )
    }

    pub fn is_random(self) -> bool {
        matches!(self, BaselineKind::RandomTruncate | BaselineKind::RandomProject)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub k: usize,
    pub seed: u64,
    pub gamma_fixed: f64,
    pub l2_normalize: bool,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind, k: usize) -> Self {
        Self {
            kind,
            k,
            seed: 0,
            gamma_fixed: DEFAULT_FIXED_GAMMA,
            l2_normalize: true,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        check_k(self.k, dim)?;
        if !(0.0..=1.0).contains(&self.gamma_fixed) {
            return Err(Error::Config(format!(
                "fixed gamma must lie in [0, 1], got {}",
                self.gamma_fixed
            )));
        }
        Ok(())
    }

    /// Builds a reusable compressor for `dim`-dimensional inputs. Spectral
    /// kinds need a fitted model.
    pub fn build(&self, dim: usize, model: Option<&SpectralModel>) -> Result<Box<dyn Compressor>> {
        self.validate(dim)?;
        let l2 = self.l2_normalize;
        let spectral = |gamma: f64| -> Result<Box<dyn Compressor>> {
            let model = model.ok_or_else(|| {
                Error::Config(format!("{} requires a fitted model", self.kind))
            })?;
            if model.dim() != dim {
                return Err(Error::Shape(format!(
                    "model dimension {} does not match input dimension {dim}",
                    model.dim()
                )));
            }
            Ok(Box::new(build_plan(model, self.k, Some(gamma), l2)?))
        };
        match self.kind {
            BaselineKind::PrefixTruncate => Ok(Box::new(ColumnSubset {
                dim,
                columns: (0..self.k).collect(),
                l2_normalize: l2,
            })),
            BaselineKind::RandomTruncate => Ok(Box::new(ColumnSubset {
                dim,
                columns: random_columns(dim, self.k, self.seed)?,
                l2_normalize: l2,
            })),
            BaselineKind::RandomProject => {
                Ok(Box::new(GaussianProjection::new(dim, self.k, self.seed, l2)?))
            }
            BaselineKind::Pca => spectral(0.0),
            BaselineKind::Whitening => spectral(1.0),
            BaselineKind::FixedGamma => spectral(self.gamma_fixed),
        }
    }
}

fn check_k(k: usize, dim: usize) -> Result<()> {
    if k == 0 || k > dim {
        Err(Error::Config(format!(
            "target dimension {k} outside [1, {dim}]"
        )))
    } else {
        Ok(())
    }
}

/// Keeps a fixed list of input columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSubset {
    pub dim: usize,
    pub columns: Vec<usize>,
    pub l2_normalize: bool,
}

impl Compressor for ColumnSubset {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.columns.len()
    }

    fn compress(&self, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        check_input(x, self.dim)?;
        let mut out = x.select_columns(&self.columns);
        if self.l2_normalize {
            out.l2_normalize_rows();
        }
        Ok(out)
    }
}

/// `x R` with `R` a `d x k` matrix of i.i.d. `N(0, 1/k)` entries. No
/// centering is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProjection {
    pub dim: usize,
    pub k: usize,
    /// Column-major `d x k`.
    pub matrix: Vec<f64>,
    pub l2_normalize: bool,
}

impl GaussianProjection {
    pub fn new(dim: usize, k: usize, seed: u64, l2_normalize: bool) -> Result<Self> {
        check_k(k, dim)?;
        Ok(Self {
            dim,
            k,
            matrix: gaussian_matrix(dim, k, seed),
            l2_normalize,
        })
    }
}

impl Compressor for GaussianProjection {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.k
    }

    fn compress(&self, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        check_input(x, self.dim)?;
        let (d, k) = (self.dim, self.k);
        let mut out = vec![0.0f32; x.rows() * k];
        out.par_chunks_mut(k)
            .zip(x.as_slice().par_chunks(d))
            .for_each_init(
                || (vec![0.0f64; d], vec![0.0f64; k]),
                |(widened, projected), (dst, row)| {
                    for (w, &v) in widened.iter_mut().zip(row) {
                        *w = f64::from(v);
                    }
                    for (j, p) in projected.iter_mut().enumerate() {
                        *p = dot4(widened, &self.matrix[j * d..(j + 1) * d]);
                    }
                    let norm = projected.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let scale = if self.l2_normalize && norm > 0.0 { 1.0 / norm } else { 1.0 };
                    for (o, &v) in dst.iter_mut().zip(projected.iter()) {
                        *o = (v * scale) as f32;
                    }
                },
            );
        Ok(EmbeddingMatrix::from_parts(x.rows(), k, out))
    }
}

fn check_input(x: &EmbeddingMatrix, dim: usize) -> Result<()> {
    if x.dim() != dim {
        Err(Error::Shape(format!(
            "input has {} columns, compressor expects {dim}",
            x.dim()
        )))
    } else {
        Ok(())
    }
}

/// `k` distinct column indices (ascending) drawn from `0..dim`; depends only
/// on `(dim, k, seed)`.
pub fn random_columns(dim: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(k, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = index::sample(&mut rng, dim, k).into_vec();
    cols.sort_unstable();
    Ok(cols)
}

/// Column-major `dim x k` matrix with i.i.d. `N(0, 1/k)` entries.
pub fn gaussian_matrix(dim: usize, k: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (k as f64).sqrt()).expect("positive std");
    (0..dim * k).map(|_| normal.sample(&mut rng)).collect()
}

pub fn prefix_truncate(x: &EmbeddingMatrix, k: usize, l2_normalize: bool) -> Result<EmbeddingMatrix> {
    let mut spec = BaselineSpec::new(BaselineKind::PrefixTruncate, k);
    spec.l2_normalize = l2_normalize;
    spec.build(x.dim(), None)?.compress(x)
}

pub fn random_truncate(
    x: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    l2_normalize: bool,
) -> Result<EmbeddingMatrix> {
    ColumnSubset {
        dim: x.dim(),
        columns: random_columns(x.dim(), k, seed)?,
        l2_normalize,
    }
    .compress(x)
}

pub fn random_project(
    x: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    l2_normalize: bool,
) -> Result<EmbeddingMatrix> {
    GaussianProjection::new(x.dim(), k, seed, l2_normalize)?.compress(x)
}

pub fn pca_project(
    model: &SpectralModel,
    x: &EmbeddingMatrix,
    k: usize,
    l2_normalize: bool,
) -> Result<EmbeddingMatrix> {
    fixed_gamma(model, x, k, 0.0, l2_normalize)
}

pub fn whiten(
    model: &SpectralModel,
    x: &EmbeddingMatrix,
    k: usize,
    l2_normalize: bool,
) -> Result<EmbeddingMatrix> {
    fixed_gamma(model, x, k, 1.0, l2_normalize)
}

pub fn fixed_gamma(
    model: &SpectralModel,
    x: &EmbeddingMatrix,
    k: usize,
    gamma: f64,
    l2_normalize: bool,
) -> Result<EmbeddingMatrix> {
    transform(&build_plan(model, k, Some(gamma), l2_normalize)?, x)
}
