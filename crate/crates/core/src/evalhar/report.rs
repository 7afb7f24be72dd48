use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{evaluate, exact_search, search_compressed, EvalSettings, Metric, RetrievalTask, Similarity};
use crate::baselines::{BaselineKind, BaselineSpec, DEFAULT_FIXED_GAMMA};
use crate::error::{Error, Result};
use crate::tempering::{
    build_plan, validate_tail_fraction, Compressor, FitConfig, SpectralModel,
    DEFAULT_SAMPLE_CAP, DEFAULT_TAIL_FRACTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Uncompressed embeddings, reported once at `k = d`.
    Full,
    Baseline(BaselineKind),
    SpecTemp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Baseline(kind) => kind.name(),
            Method::SpecTemp => "spectemp",
        }
    }

    pub fn all() -> Vec<Method> {
        let mut v = vec![Method::Full];
        v.extend(BaselineKind::ALL.into_iter().map(Method::Baseline));
        v.push(Method::SpecTemp);
        v
    }

    fn needs_model(self) -> bool {
        match self {
            Method::Full => false,
            Method::Baseline(kind) => kind.needs_model(),
            Method::SpecTemp => true,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Method::Full),
            "spectemp" => Ok(Method::SpecTemp),
            other => other.parse().map(Method::Baseline).map_err(|_| {
                Error::Config(format!("unknown method {other:?}"))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tail_fraction: f64,
    pub sample_cap: usize,
    pub similarity: Similarity,
    pub l2_normalize: bool,
    pub cutoff: usize,
    pub metrics: Vec<Metric>,
    pub gamma_fixed: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            sample_cap: DEFAULT_SAMPLE_CAP,
            similarity: Similarity::Cosine,
            l2_normalize: true,
            cutoff: super::DEFAULT_CUTOFF,
            metrics: vec![Metric::NdcgAt10],
            gamma_fixed: DEFAULT_FIXED_GAMMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub k: usize,
    /// `None` marks the mean over seeds.
    pub seed: Option<u64>,
    pub metric: Metric,
    pub value: f64,
    /// Exponent used, for the spectral methods.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub seeds: Vec<u64>,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn mean(&self, method: &str, k: usize, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.k == k && r.metric == metric && r.seed.is_none())
            .map(|r| r.value)
    }

    pub fn value(&self, method: &str, k: usize, seed: u64, metric: Metric) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.k == k && r.metric == metric && r.seed == Some(seed))
            .map(|r| r.value)
    }

    /// `method,k,seed,metric,value`; mean rows carry `mean` in the seed column.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
        w.write_record(["method", "k", "seed", "metric", "value"])
            .map_err(csv_err)?;
        for r in &self.rows {
            let seed = r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string());
            w.write_record([
                r.method.clone(),
                r.k.to_string(),
                seed,
                r.metric.to_string(),
                r.value.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("json: {e}")))
    }

    /// Mean values on a 0-100 scale, one block per metric.
    pub fn to_table(&self) -> String {
        let mut methods: Vec<&str> = Vec::new();
        let mut dims: Vec<usize> = Vec::new();
        for r in self.rows.iter().filter(|r| r.seed.is_none()) {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
            if !dims.contains(&r.k) {
                dims.push(r.k);
            }
        }
        let mut out = String::new();
        for &metric in &self.config.metrics {
            let _ = writeln!(out, "{metric} (mean over {} seed(s), x100)", self.seeds.len());
            let _ = write!(out, "{:<18}", "method");
            for k in &dims {
                let _ = write!(out, "{:>9}", format!("k={k}"));
            }
            out.push('\n');
            for m in &methods {
                let _ = write!(out, "{m:<18}");
                for &k in &dims {
                    match self.mean(m, k, metric) {
                        Some(v) => {
                            let _ = write!(out, "{:>9.2}", v * 100.0);
                        }
                        None => {
                            let _ = write!(out, "{:>9}", "-");
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every method at every dimension for every seed and appends the
/// per-cell mean across seeds.
///
/// The spectral model is fitted per seed (the seed drives corpus
/// subsampling); when the corpus fits under the sample cap a single fit is
/// shared. Random baselines use the seed directly.
pub fn run_matrix(
    methods: &[Method],
    dims: &[usize],
    task: &RetrievalTask,
    seeds: &[u64],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let d = task.dim();
    validate_tail_fraction(config.tail_fraction)?;
    if methods.is_empty() || seeds.is_empty() || config.metrics.is_empty() {
        return Err(Error::Config("methods, seeds and metrics must be non-empty".into()));
    }
    if dims.is_empty() && methods.iter().any(|m| *m != Method::Full) {
        return Err(Error::Config("no target dimensions given".into()));
    }
    if let Some(bad) = dims.iter().find(|&&k| k == 0 || k > d) {
        return Err(Error::Config(format!(
            "target dimension {bad} outside [1, {d}]"
        )));
    }

    let needs_model = methods.iter().any(|m| m.needs_model());
    let shared_fit = task.docs.rows() <= config.sample_cap;
    let mut shared: Option<SpectralModel> = None;

    // (method, k) -> per-seed (value per metric, gamma)
    let mut cells: Vec<(Method, usize, Vec<(u64, Vec<f64>, Option<f64>)>)> = Vec::new();
    for &m in methods {
        let ks: Vec<usize> = if m == Method::Full { vec![d] } else { dims.to_vec() };
        for k in ks {
            cells.push((m, k, Vec::new()));
        }
    }

    for &seed in seeds {
        let model = if !needs_model {
            None
        } else if shared_fit {
            if shared.is_none() {
                shared = Some(fit(task, config, seed)?);
            }
            shared.clone()
        } else {
            Some(fit(task, config, seed)?)
        };

        for (method, k, results) in cells.iter_mut() {
            let (run, gamma) = match *method {
                Method::Full => (
                    exact_search(
                        &task.docs,
                        &task.doc_ids,
                        &task.queries,
                        &task.query_ids,
                        config.similarity,
                        config.cutoff,
                    )?,
                    None,
                ),
                Method::Baseline(kind) => {
                    let spec = BaselineSpec {
                        kind,
                        k: *k,
                        seed,
                        gamma_fixed: config.gamma_fixed,
                        l2_normalize: config.l2_normalize,
                    };
                    let c = spec.build(d, model.as_ref())?;
                    let gamma = match kind {
                        BaselineKind::Pca => Some(0.0),
                        BaselineKind::Whitening => Some(1.0),
                        BaselineKind::FixedGamma => Some(config.gamma_fixed),
                        _ => None,
                    };
                    (search_compressed(c.as_ref(), task, config.similarity, config.cutoff)?, gamma)
                }
                Method::SpecTemp => {
                    let model = model.as_ref().expect("model fitted for spectral methods");
                    let plan = build_plan(model, *k, None, config.l2_normalize)?;
                    let gamma = plan.gamma;
                    let c: &dyn Compressor = &plan;
                    (search_compressed(c, task, config.similarity, config.cutoff)?, Some(gamma))
                }
            };
            let values = config
                .metrics
                .iter()
                .map(|&metric| evaluate(&run, &task.qrels, metric).value)
                .collect();
            results.push((seed, values, gamma));
        }
    }

    let mut rows = Vec::new();
    for (method, k, results) in &cells {
        for (seed, values, gamma) in results {
            for (&metric, &value) in config.metrics.iter().zip(values) {
                rows.push(ReportRow {
                    method: method.name().to_string(),
                    k: *k,
                    seed: Some(*seed),
                    metric,
                    value,
                    gamma: *gamma,
                });
            }
        }
        for (mi, &metric) in config.metrics.iter().enumerate() {
            let mean = results.iter().map(|(_, v, _)| v[mi]).sum::<f64>() / results.len() as f64;
            let gammas: Vec<f64> = results.iter().filter_map(|(_, _, g)| *g).collect();
            let gamma = (gammas.len() == results.len())
                .then(|| gammas.iter().sum::<f64>() / gammas.len() as f64);
            rows.push(ReportRow {
                method: method.name().to_string(),
                k: *k,
                seed: None,
                metric,
                value: mean,
                gamma,
            });
        }
    }

    Ok(EvalReport {
        config: config.clone(),
        seeds: seeds.to_vec(),
        rows,
    })
}

fn fit(task: &RetrievalTask, config: &EvalConfig, seed: u64) -> Result<SpectralModel> {
    SpectralModel::fit(
        &task.docs,
        &FitConfig {
            tail_fraction: config.tail_fraction,
            sample_cap: config.sample_cap,
            seed,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub tail_fraction: f64,
    pub k: usize,
    pub knee: Option<usize>,
    pub gamma: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub metric: Metric,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityReport {
    /// `(k, max - min)` of the score across tail fractions.
    pub fn spread(&self) -> Vec<(usize, f64)> {
        let mut ks: Vec<usize> = self.rows.iter().map(|r| r.k).collect();
        ks.dedup();
        let mut seen = Vec::new();
        for k in ks {
            if seen.iter().any(|(kk, _)| *kk == k) {
                continue;
            }
            let scores = self.rows.iter().filter(|r| r.k == k).map(|r| r.score);
            let (lo, hi) = scores.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s), hi.max(s))
            });
            seen.push((k, hi - lo));
        }
        seen
    }

    pub fn max_spread(&self) -> f64 {
        self.spread().iter().map(|(_, s)| *s).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
        w.write_record(["tail_fraction", "k", "knee", "gamma", "score"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.tail_fraction.to_string(),
                r.k.to_string(),
                r.knee.map_or_else(String::new, |k| k.to_string()),
                r.gamma.to_string(),
                r.score.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Re-derives the SNR analysis at each tail fraction (the spectrum itself
/// does not depend on it) and scores SpecTemp at every dimension.
pub fn tail_sensitivity(
    model: &SpectralModel,
    task: &RetrievalTask,
    fractions: &[f64],
    dims: &[usize],
    l2_normalize: bool,
    settings: &EvalSettings,
) -> Result<SensitivityReport> {
    let mut rows = Vec::new();
    for &fraction in fractions {
        let refit = model.with_tail_fraction(fraction)?;
        for &k in dims {
            let plan = build_plan(&refit, k, None, l2_normalize)?;
            let score = super::score_compressor(&plan, task, settings)?;
            rows.push(SensitivityRow {
                tail_fraction: fraction,
                k,
                knee: refit.profile.knee_index,
                gamma: plan.gamma,
                score,
            });
        }
    }
    Ok(SensitivityReport {
        metric: settings.metric,
        rows,
    })
}
