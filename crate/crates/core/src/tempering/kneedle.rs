//! Knee detection on a decreasing, convex curve (Kneedle, offline variant,
//! sensitivity 1, no smoothing).

use crate::error::{Error, Result};

pub const SENSITIVITY: f64 = 1.0;

/// Returns the 1-based rank of the knee of a non-increasing SNR curve.
///
/// Only the strictly positive prefix is considered. Ranks and values are
/// min-max normalized, the curve is flipped to concave-increasing form
/// (`1 - y`), and the difference curve `(1 - y) - x` is scanned for local
/// maxima. A maximum is accepted as the knee once the curve falls below
/// `d_max - S * mean_x_spacing` before the next local maximum; a local
/// minimum in between cancels it. When nothing is accepted the global
/// argmax of the difference curve is used.
pub fn detect_knee(snr: &[f64]) -> Result<usize> {
    let m = snr.iter().take_while(|&&v| v > 0.0).count();
    if m < 3 {
        return Err(Error::Degenerate(format!(
            "knee detection needs at least 3 positive SNR values, found {m}"
        )));
    }
    let curve = &snr[..m];
    let diff = difference_curve(curve);
    Ok(first_knee(&diff).unwrap_or_else(|| argmax(&diff)) + 1)
}

/// `(1 - y_norm) - x_norm` over the given curve.
pub(crate) fn difference_curve(curve: &[f64]) -> Vec<f64> {
    let m = curve.len();
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    (0..m)
        .map(|i| {
            let x = i as f64 / (m - 1) as f64;
            let y = if span > 0.0 { (curve[i] - lo) / span } else { 0.0 };
            (1.0 - y) - x
        })
        .collect()
}

fn first_knee(diff: &[f64]) -> Option<usize> {
    let m = diff.len();
    let spacing = 1.0 / (m - 1) as f64;
    let is_max = |i: usize| {
        i > 0 && i + 1 < m && diff[i] > diff[i - 1] && diff[i] >= diff[i + 1]
    };
    let is_min = |i: usize| {
        i > 0 && i + 1 < m && diff[i] < diff[i - 1] && diff[i] <= diff[i + 1]
    };

    let mut candidate: Option<(usize, f64)> = None;
    for j in 0..m {
        if let Some((idx, threshold)) = candidate {
            if diff[j] < threshold {
                return Some(idx);
            }
        }
        if is_max(j) {
            candidate = Some((j, diff[j] - SENSITIVITY * spacing));
        } else if is_min(j) {
            candidate = None;
        }
    }
    None
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
