//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spectemp::evalhar::{similarity_score, Similarity};
use spectemp::spectral::SymmetricMatrix;
use spectemp::EmbeddingMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Orthogonal `d x d` matrix (row-major) from QR of a Gaussian matrix via
/// modified Gram-Schmidt.
pub fn orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        for u in &q {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            q.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    q.concat()
}

/// `n` rows of `N(0, diag(variances))`, optionally rotated by a row-major
/// orthogonal matrix (`x -> R x`).
pub fn gaussian_corpus(
    n: usize,
    variances: &[f64],
    rotation: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> EmbeddingMatrix {
    let d = variances.len();
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for (zi, v) in z.iter_mut().zip(variances) {
            *zi = normal(rng) * v.sqrt();
        }
        match rotation {
            Some(r) => {
                for i in 0..d {
                    let s: f64 = (0..d).map(|j| r[i * d + j] * z[j]).sum();
                    data.push(s as f32);
                }
            }
            None => data.extend(z.iter().map(|&v| v as f32)),
        }
    }
    EmbeddingMatrix::new(n, d, data).unwrap()
}

/// Random PSD matrix `B B^T / r` with random rank and occasional repeated
/// eigenvalues.
pub fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    let r = rng.random_range(1..=d);
    let b: Vec<f64> = (0..d * r).map(|_| normal(rng)).collect();
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] = (0..r).map(|t| b[i * r + t] * b[j * r + t]).sum::<f64>() / r as f64;
        }
    }
    if rng.random_bool(0.2) {
        // identity shift forces a cluster of equal eigenvalues
        for i in 0..d {
            m[i * d + i] += 1.0;
        }
    }
    SymmetricMatrix::new(d, m).unwrap()
}

/// Eigenvalues by cyclic Jacobi rotations, sorted descending.
pub fn jacobi_eigenvalues(m: &SymmetricMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut a: Vec<f64> = m.as_slice().to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Knee as the point farthest (perpendicular distance) from the chord
/// joining the first and last points, after min-max scaling both axes.
/// 1-based.
pub fn chord_knee(y: &[f64]) -> usize {
    let m = y.len();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let pts: Vec<(f64, f64)> = y
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as f64 / (m - 1) as f64, (v - lo) / (hi - lo)))
        .collect();
    let (x0, y0) = pts[0];
    let (x1, y1) = pts[m - 1];
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &(x, yv)) in pts.iter().enumerate() {
        let dist = ((x1 - x0) * (y0 - yv) - (x0 - x) * (y1 - y0)).abs() / len;
        if dist > best.1 {
            best = (i, dist);
        }
    }
    best.0 + 1
}

/// Scores every (query, doc) pair and sorts the full list.
pub fn naive_search(
    docs: &EmbeddingMatrix,
    doc_ids: &[String],
    queries: &EmbeddingMatrix,
    query_ids: &[String],
    similarity: Similarity,
    cutoff: usize,
) -> BTreeMap<String, Vec<(String, f32)>> {
    let mut out = BTreeMap::new();
    for (qi, qid) in query_ids.iter().enumerate() {
        let mut scored: Vec<(String, f32)> = Vec::new();
        for (di, did) in doc_ids.iter().enumerate() {
            scored.push((did.clone(), similarity_score(queries.row(qi), docs.row(di), similarity)));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(cutoff);
        out.insert(qid.clone(), scored);
    }
    out
}

/// Mean of the lowest `frac` quantile of the Marchenko-Pastur law with
/// aspect ratio `y` and unit variance, by numerical integration.
pub fn mp_lower_tail_mean(y: f64, frac: f64) -> f64 {
    let (a, b) = ((1.0 - y.sqrt()).powi(2), (1.0 + y.sqrt()).powi(2));
    let n = 200_000;
    let h = (b - a) / n as f64;
    let density = |x: f64| ((b - x) * (x - a)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * y * x);
    let mut total = 0.0;
    let cells: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = a + (i as f64 + 0.5) * h;
            let p = density(x) * h;
            total += p;
            (x, p)
        })
        .collect();
    let (mut mass, mut moment) = (0.0, 0.0);
    for (x, p) in cells {
        if mass + p > frac * total {
            let part = frac * total - mass;
            moment += x * part;
            mass += part;
            break;
        }
        mass += p;
        moment += x * p;
    }
    moment / mass
}
