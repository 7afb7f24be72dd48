//! Spiked-covariance retrieval tasks.
//!
//! Documents are Gaussian with a diagonal covariance made of a few spike
//! tiers over an isotropic noise floor, rotated by a seeded random
//! orthogonal matrix. Each query is a perturbed copy of one distinct
//! document and is judged relevant to that document only.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RetrievalTask;
use crate::error::{Error, Result};
use crate::matio::{EmbeddingMatrix, QrelsTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub n_queries: usize,
    pub dim: usize,
    /// `(count, variance)` per spike tier, leading axes first.
    pub spikes: Vec<(usize, f64)>,
    pub noise_variance: f64,
    /// Standard deviation of the isotropic query perturbation.
    pub query_perturbation: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_docs == 0 || self.n_queries == 0 || self.dim == 0 {
            return Err(Error::Config("synthetic sizes must be positive".into()));
        }
        if self.n_queries > self.n_docs {
            return Err(Error::Config(format!(
                "{} queries need at least as many documents, got {}",
                self.n_queries, self.n_docs
            )));
        }
        let signal: usize = self.spikes.iter().map(|(c, _)| c).sum();
        if signal > self.dim {
            return Err(Error::Config(format!(
                "spike counts sum to {signal}, more than dimension {}",
                self.dim
            )));
        }
        let variances_ok = self
            .spikes
            .iter()
            .map(|(_, v)| *v)
            .chain([self.noise_variance])
            .all(|v| v.is_finite() && v > 0.0);
        if !variances_ok {
            return Err(Error::Config("all variances must be positive".into()));
        }
        if !(self.query_perturbation.is_finite() && self.query_perturbation >= 0.0) {
            return Err(Error::Config("query perturbation must be non-negative".into()));
        }
        Ok(())
    }

    /// Per-axis variances before rotation.
    pub fn axis_variances(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .spikes
            .iter()
            .flat_map(|&(c, var)| std::iter::repeat(var).take(c))
            .collect();
        v.resize(self.dim, self.noise_variance);
        v
    }
}

/// Haar-ish random orthogonal matrix (row-major) from Gram-Schmidt on a
/// Gaussian matrix.
pub fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut q: Vec<f64> = (0..dim * dim).map(|_| StandardNormal.sample(rng)).collect();
    for i in 0..dim {
        for _ in 0..2 {
            for j in 0..i {
                let proj: f64 = (0..dim).map(|c| q[i * dim + c] * q[j * dim + c]).sum();
                for c in 0..dim {
                    q[i * dim + c] -= proj * q[j * dim + c];
                }
            }
        }
        let norm = (0..dim).map(|c| q[i * dim + c].powi(2)).sum::<f64>().sqrt();
        for c in 0..dim {
            q[i * dim + c] /= norm;
        }
    }
    q
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<RetrievalTask> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rotation = random_orthogonal(d, &mut rng);
    let stds: Vec<f64> = spec.axis_variances().iter().map(|v| v.sqrt()).collect();

    let mut docs = Vec::with_capacity(spec.n_docs * d);
    let mut z = vec![0.0f64; d];
    for _ in 0..spec.n_docs {
        for (zi, s) in z.iter_mut().zip(&stds) {
            let g: f64 = StandardNormal.sample(&mut rng);
            *zi = g * s;
        }
        // x = Q^T z: axis i of z maps onto row i of Q
        let mut x = vec![0.0f64; d];
        for (i, &zi) in z.iter().enumerate() {
            for (xc, &qc) in x.iter_mut().zip(&rotation[i * d..(i + 1) * d]) {
                *xc += zi * qc;
            }
        }
        docs.extend(x.iter().map(|&v| v as f32));
    }
    let docs = EmbeddingMatrix::new(spec.n_docs, d, docs)?;

    let sources = index::sample(&mut rng, spec.n_docs, spec.n_queries).into_vec();
    let mut queries = Vec::with_capacity(spec.n_queries * d);
    for &src in &sources {
        for &v in docs.row(src) {
            let g: f64 = StandardNormal.sample(&mut rng);
            queries.push((f64::from(v) + spec.query_perturbation * g) as f32);
        }
    }
    let queries = EmbeddingMatrix::new(spec.n_queries, d, queries)?;

    let doc_ids = default_ids("d", spec.n_docs);
    let query_ids = default_ids("q", spec.n_queries);
    let mut qrels = QrelsTable::new();
    for (q, &src) in query_ids.iter().zip(&sources) {
        qrels.insert(q.clone(), doc_ids[src].clone(), 1)?;
    }
    Ok(RetrievalTask {
        docs,
        doc_ids,
        queries,
        query_ids,
        qrels,
    })
}

pub fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}
