//! Centering, covariance estimation and eigendecomposition of corpus
//! embeddings.
//!
//! Statistics are accumulated in f64 using an explicit two-pass scheme:
//! the column mean first, then the Gram matrix of the centered rows.

mod eigen;

pub use eigen::{eigendecompose, Eigen, SymmetricMatrix};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matio::EmbeddingMatrix;

/// Sorted eigenspectrum of a corpus covariance together with the mean used
/// to center it.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpectrum {
    pub mean: Vec<f64>,
    /// Descending, non-negative.
    pub eigenvalues: Vec<f64>,
    /// Column-major `dim x dim`; column `i` pairs with `eigenvalues[i]`, so
    /// the top-k basis is the contiguous prefix of length `dim * k`.
    pub eigenvectors: Vec<f64>,
    pub sample_count: usize,
    pub sample_seed: u64,
}

impl CovarianceSpectrum {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn eigenvector(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.eigenvectors[i * d..(i + 1) * d]
    }

    /// The first `k` eigenvectors, column-major.
    pub fn top_basis(&self, k: usize) -> &[f64] {
        &self.eigenvectors[..k * self.dim()]
    }
}

/// Draws `cap` rows uniformly without replacement (kept in original order)
/// when the matrix has more than `cap` rows; otherwise returns it as is.
pub fn subsample(m: &EmbeddingMatrix, cap: usize, seed: u64) -> EmbeddingMatrix {
    if m.rows() <= cap {
        return m.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, m.rows(), cap.max(1)).into_vec();
    picked.sort_unstable();
    m.select_rows(&picked)
}

pub fn column_mean(m: &EmbeddingMatrix) -> Vec<f64> {
    let mut mean = vec![0.0f64; m.dim()];
    for row in m.iter_rows() {
        for (acc, &v) in mean.iter_mut().zip(row) {
            *acc += f64::from(v);
        }
    }
    let n = m.rows() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

/// Subtracts the column mean from every row.
pub fn center(m: &EmbeddingMatrix) -> (EmbeddingMatrix, Vec<f64>) {
    let mean = column_mean(m);
    let data = m
        .iter_rows()
        .flat_map(|row| {
            row.iter()
                .zip(&mean)
                .map(|(&v, &mu)| (f64::from(v) - mu) as f32)
        })
        .collect();
    (EmbeddingMatrix::from_parts(m.rows(), m.dim(), data), mean)
}

/// Sample covariance `X^T X / (n - 1)` of already-centered rows.
pub fn covariance(centered: &EmbeddingMatrix) -> Result<SymmetricMatrix> {
    let zero = vec![0.0; centered.dim()];
    gram_about(centered, &zero)
}

/// Sample covariance about the given mean, centering each row in f64 on the
/// fly so no precision is lost to an intermediate f32 copy.
pub fn covariance_about(m: &EmbeddingMatrix, mean: &[f64]) -> Result<SymmetricMatrix> {
    if mean.len() != m.dim() {
        return Err(Error::Shape(format!(
            "mean has length {}, matrix has {} columns",
            mean.len(),
            m.dim()
        )));
    }
    gram_about(m, mean)
}

const BLOCK_ROWS: usize = 16;

fn gram_about(m: &EmbeddingMatrix, mean: &[f64]) -> Result<SymmetricMatrix> {
    let n = m.rows();
    let d = m.dim();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "covariance needs at least 2 rows, got {n}"
        )));
    }
    let denom = (n - 1) as f64;

    // Each task owns a band of output rows and scans the data once, so the
    // summation order per entry is fixed regardless of thread count.
    let bands: Vec<(usize, Vec<f64>)> = (0..d)
        .step_by(BLOCK_ROWS)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + BLOCK_ROWS).min(d);
            let width = d - start;
            let mut acc = vec![0.0f64; (end - start) * width];
            let mut centered = vec![0.0f64; width];
            for row in m.iter_rows() {
                for (c, (&v, &mu)) in centered
                    .iter_mut()
                    .zip(row[start..].iter().zip(&mean[start..]))
                {
                    *c = f64::from(v) - mu;
                }
                for i in 0..(end - start) {
                    let xi = centered[i];
                    if xi == 0.0 {
                        continue;
                    }
                    let out = &mut acc[i * width..(i + 1) * width];
                    for (o, &xj) in out[i..].iter_mut().zip(&centered[i..]) {
                        *o += xi * xj;
                    }
                }
            }
            (start, acc)
        })
        .collect();

    let mut c = SymmetricMatrix::zeros(d);
    for (start, acc) in bands {
        let width = d - start;
        for li in 0..acc.len() / width {
            let i = start + li;
            for j in i..d {
                let v = acc[li * width + (j - start)] / denom;
                c.set(i, j, v);
                c.set(j, i, v);
            }
        }
    }
    Ok(c)
}

/// Subsample, center, estimate covariance and decompose it.
pub fn fit_spectrum(corpus: &EmbeddingMatrix, cap: usize, seed: u64) -> Result<CovarianceSpectrum> {
    if cap == 0 {
        return Err(Error::Config("sample cap must be at least 1".into()));
    }
    let sample = subsample(corpus, cap, seed);
    if sample.rows() < 2 {
        return Err(Error::Degenerate(format!(
            "spectrum fit needs at least 2 rows, got {}",
            sample.rows()
        )));
    }
    let mean = column_mean(&sample);
    let cov = covariance_about(&sample, &mean)?;
    let eig = eigendecompose(&cov)?;
    Ok(CovarianceSpectrum {
        mean,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        sample_count: sample.rows(),
        sample_seed: seed,
    })
}
