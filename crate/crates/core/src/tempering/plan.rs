use rayon::prelude::*;

use super::{check_rank, SpectralModel};
use crate::error::{Error, Result};
use crate::matio::EmbeddingMatrix;
use crate::spectral::CovarianceSpectrum;

/// Anything that maps `d`-dimensional embeddings to `k` dimensions the same
/// way for documents and queries.
pub trait Compressor: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn compress(&self, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix>;
}

/// Linear map `y = (x - mu)^T W` with `W = U_k diag(lambda^(-gamma/2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperingPlan {
    pub k: usize,
    pub gamma: f64,
    /// Column-major `d x k`.
    pub weights: Vec<f64>,
    pub mean: Vec<f64>,
    pub l2_normalize: bool,
}

impl TemperingPlan {
    pub fn from_spectrum(
        spectrum: &CovarianceSpectrum,
        k: usize,
        gamma: f64,
        l2_normalize: bool,
    ) -> Result<Self> {
        let d = spectrum.dim();
        check_rank(k, d)?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        let lambda_max = spectrum.eigenvalues[0];
        let floor = (1e-12 * lambda_max).max(1e-30);
        let mut weights = Vec::with_capacity(d * k);
        for j in 0..k {
            let scale = spectrum.eigenvalues[j].max(floor).powf(-gamma / 2.0);
            weights.extend(spectrum.eigenvector(j).iter().map(|u| u * scale));
        }
        Ok(Self {
            k,
            gamma,
            weights,
            mean: spectrum.mean.clone(),
            l2_normalize,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.weights[j * d..(j + 1) * d]
    }

    fn project_row(&self, row: &[f32], scratch: &mut Scratch, out: &mut [f32]) {
        for ((c, &v), &mu) in scratch.centered.iter_mut().zip(row).zip(&self.mean) {
            *c = f64::from(v) - mu;
        }
        let mut sq = 0.0;
        for (j, p) in scratch.projected.iter_mut().enumerate() {
            *p = dot4(&scratch.centered, self.column(j));
            sq += *p * *p;
        }
        let norm = sq.sqrt();
        let scale = if self.l2_normalize && norm > 0.0 { 1.0 / norm } else { 1.0 };
        for (o, &v) in out.iter_mut().zip(&scratch.projected) {
            *o = (v * scale) as f32;
        }
    }
}

struct Scratch {
    centered: Vec<f64>,
    projected: Vec<f64>,
}

/// Four independent partial sums; fixed order, so results are reproducible.
#[inline]
pub(crate) fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let o = i * 4;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Plan for target dimension `k`. Without an override, gamma comes from
/// the model's SNR profile.
pub fn build_plan(
    model: &SpectralModel,
    k: usize,
    gamma_override: Option<f64>,
    l2_normalize: bool,
) -> Result<TemperingPlan> {
    check_rank(k, model.dim())?;
    let gamma = match gamma_override {
        Some(g) => g,
        None => model.gamma(k)?,
    };
    TemperingPlan::from_spectrum(&model.spectrum, k, gamma, l2_normalize)
}

pub fn transform(plan: &TemperingPlan, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let d = plan.dim();
    if x.dim() != d {
        return Err(Error::Shape(format!(
            "input has {} columns, plan expects {d}",
            x.dim()
        )));
    }
    let k = plan.k;
    let mut out = vec![0.0f32; x.rows() * k];
    out.par_chunks_mut(k)
        .zip(x.as_slice().par_chunks(d))
        .for_each_init(
            || Scratch {
                centered: vec![0.0; d],
                projected: vec![0.0; k],
            },
            |scratch, (dst, row)| plan.project_row(row, scratch, dst),
        );
    Ok(EmbeddingMatrix::from_parts(x.rows(), k, out))
}

impl Compressor for TemperingPlan {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn output_dim(&self) -> usize {
        self.k
    }

    fn compress(&self, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        transform(self, x)
    }
}
