use super::{score_compressor, EvalSettings, RetrievalTask};
use crate::error::{Error, Result};
use crate::tempering::{build_plan, SpectralModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub k: usize,
    pub best_gamma: f64,
    pub best_score: f64,
    /// `(gamma, score)` for every grid point, ascending gamma.
    pub curve: Vec<(f64, f64)>,
}

/// `{0, step, 2 step, ..., 1}`; `step` must split `[0, 1]` into a whole
/// number of intervals.
pub fn grid_values(step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step must lie in (0, 1], got {step}")));
    }
    let intervals = (1.0 / step).round();
    if (intervals * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "grid step {step} does not divide [0, 1] evenly"
        )));
    }
    let n = intervals as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Evaluates fixed-gamma compression at every grid point and returns the
/// best one (smallest gamma among ties).
pub fn grid_search_gamma(
    model: &SpectralModel,
    task: &RetrievalTask,
    k: usize,
    step: f64,
    l2_normalize: bool,
    settings: &EvalSettings,
) -> Result<GridResult> {
    let gammas = grid_values(step)?;
    let mut curve = Vec::with_capacity(gammas.len());
    for gamma in gammas {
        let plan = build_plan(model, k, Some(gamma), l2_normalize)?;
        curve.push((gamma, score_compressor(&plan, task, settings)?));
    }
    let (best_gamma, best_score) = curve
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    Ok(GridResult {
        k,
        best_gamma,
        best_score,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_construction() {
        assert_eq!(grid_values(0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = grid_values(0.05).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 1.0);
        assert!((g[7] - 0.35).abs() < 1e-15);
        assert!(grid_values(0.3).is_err());
        assert!(grid_values(0.0).is_err());
        assert!(grid_values(1.5).is_err());
    }
}
