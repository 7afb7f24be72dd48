//! Python bindings: embedding matrices, spectral models, tempering,
//! baselines, exact search, metrics and synthetic tasks.

use std::collections::{BTreeMap, HashMap};

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spectemp::baselines::{BaselineKind, BaselineSpec};
use spectemp::evalhar::{self, Metric, RetrievalRun, Similarity, SynthSpec};
use spectemp::tempering::{self, DEFAULT_SAMPLE_CAP, DEFAULT_SEED, DEFAULT_TAIL_FRACTION};
use spectemp::{matio, Error, FitConfig, QrelsTable};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyOSError::new_err(err.to_string()),
        Error::Config(_) | Error::Shape(_) => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for spectemp::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Row-major `f32` embedding matrix.
#[pyclass(name = "Embeddings", module = "spectemp_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Embeddings {
    pub inner: spectemp::EmbeddingMatrix,
}

#[pymethods]
impl Embeddings {
    #[new]
    fn new(rows: Vec<Vec<f32>>) -> PyResult<Self> {
        if rows.is_empty() {
            return Err(PyValueError::new_err("use Embeddings.from_flat for an empty matrix"));
        }
        Ok(Self {
            inner: spectemp::EmbeddingMatrix::from_rows(&rows).py()?,
        })
    }

    #[staticmethod]
    fn from_flat(rows: usize, dim: usize, data: Vec<f32>) -> PyResult<Self> {
        Ok(Self {
            inner: spectemp::EmbeddingMatrix::new(rows, dim, data).py()?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: matio::load_embeddings(path).py()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        matio::save_embeddings(&self.inner, path).py()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f32>> {
        if i >= self.inner.rows() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn to_list(&self) -> Vec<Vec<f32>> {
        self.inner.iter_rows().map(<[f32]>::to_vec).collect()
    }

    fn flat(&self) -> Vec<f32> {
        self.inner.as_slice().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.rows()
    }

    fn __repr__(&self) -> String {
        format!("Embeddings(rows={}, dim={})", self.inner.rows(), self.inner.dim())
    }
}

/// Fitted covariance spectrum plus SNR analysis.
#[pyclass(name = "SpectralModel", module = "spectemp_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct SpectralModel {
    pub inner: spectemp::SpectralModel,
}

#[pymethods]
impl SpectralModel {
    #[staticmethod]
    #[pyo3(signature = (corpus, tail_fraction = DEFAULT_TAIL_FRACTION, sample_cap = DEFAULT_SAMPLE_CAP, seed = DEFAULT_SEED))]
    fn fit(py: Python<'_>, corpus: &Embeddings, tail_fraction: f64, sample_cap: usize, seed: u64) -> PyResult<Self> {
        let config = FitConfig {
            tail_fraction,
            sample_cap,
            seed,
        };
        let inner = py.detach(|| spectemp::SpectralModel::fit(&corpus.inner, &config)).py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: matio::load_model(path).py()?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        matio::save_model(&self.inner, path).py()
    }

    fn with_tail_fraction(&self, tail_fraction: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_tail_fraction(tail_fraction).py()?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.spectrum.eigenvalues.clone()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.spectrum.mean.clone()
    }

    #[getter]
    fn snr(&self) -> Vec<f64> {
        self.inner.profile.snr.clone()
    }

    #[getter]
    fn noise_floor(&self) -> f64 {
        self.inner.profile.noise_floor
    }

    /// 1-based knee rank, or None when the spectrum has no usable knee.
    #[getter]
    fn knee(&self) -> Option<usize> {
        self.inner.profile.knee_index
    }

    #[getter]
    fn reference_snr(&self) -> f64 {
        self.inner.profile.reference_snr
    }

    #[getter]
    fn sample_count(&self) -> usize {
        self.inner.spectrum.sample_count
    }

    fn eigenvector(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.dim() {
            return Err(PyValueError::new_err(format!("eigenvector {i} out of range")));
        }
        Ok(self.inner.spectrum.eigenvector(i).to_vec())
    }

    fn gamma(&self, k: usize) -> PyResult<f64> {
        self.inner.gamma(k).py()
    }

    /// Compress `x` to `k` dimensions; `gamma` overrides the predicted exponent.
    #[pyo3(signature = (x, k, gamma = None, normalize = true))]
    fn transform(&self, py: Python<'_>, x: &Embeddings, k: usize, gamma: Option<f64>, normalize: bool) -> PyResult<Embeddings> {
        let inner = py
            .detach(|| {
                let plan = tempering::build_plan(&self.inner, k, gamma, normalize)?;
                tempering::transform(&plan, &x.inner)
            })
            .py()?;
        Ok(Embeddings { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralModel(dim={}, noise_floor={}, knee={:?})",
            self.inner.dim(),
            self.inner.profile.noise_floor,
            self.inner.profile.knee_index
        )
    }
}

#[pyfunction]
#[pyo3(signature = (eigenvalues, tail_fraction = DEFAULT_TAIL_FRACTION))]
fn noise_floor(eigenvalues: Vec<f64>, tail_fraction: f64) -> PyResult<f64> {
    tempering::noise_floor(&eigenvalues, tail_fraction).py()
}

#[pyfunction]
fn snr_profile(eigenvalues: Vec<f64>, noise_floor: f64) -> Vec<f64> {
    tempering::snr_profile(&eigenvalues, noise_floor)
}

/// 1-based knee rank of a non-increasing SNR curve.
#[pyfunction]
fn detect_knee(snr: Vec<f64>) -> PyResult<usize> {
    tempering::detect_knee(&snr).py()
}

#[pyfunction]
fn derive_gamma(snr: Vec<f64>, knee: usize, k: usize) -> PyResult<f64> {
    tempering::derive_gamma(&snr, knee, k).py()
}

/// Applies one of the comparison methods (`prefix_truncate`,
/// `random_truncate`, `random_project`, `pca`, `whitening`, `fixed_gamma`).
#[pyfunction]
#[pyo3(signature = (kind, x, k, model = None, seed = 0, gamma_fixed = 0.5, normalize = true))]
fn baseline(
    kind: &str,
    x: &Embeddings,
    k: usize,
    model: Option<&SpectralModel>,
    seed: u64,
    gamma_fixed: f64,
    normalize: bool,
) -> PyResult<Embeddings> {
    let kind: BaselineKind = kind.parse().py()?;
    let spec = BaselineSpec {
        kind,
        k,
        seed,
        gamma_fixed,
        l2_normalize: normalize,
    };
    let compressor = spec.build(x.inner.dim(), model.map(|m| &m.inner)).py()?;
    Ok(Embeddings {
        inner: compressor.compress(&x.inner).py()?,
    })
}

type Ranked = BTreeMap<String, Vec<(String, f32)>>;

/// Exact top-`cutoff` search; returns `{query_id: [(doc_id, score), ...]}`.
#[pyfunction]
#[pyo3(signature = (docs, queries, doc_ids = None, query_ids = None, similarity = "cosine", cutoff = 10))]
fn exact_search(
    py: Python<'_>,
    docs: &Embeddings,
    queries: &Embeddings,
    doc_ids: Option<Vec<String>>,
    query_ids: Option<Vec<String>>,
    similarity: &str,
    cutoff: usize,
) -> PyResult<Ranked> {
    let similarity: Similarity = similarity.parse().py()?;
    let doc_ids = doc_ids.unwrap_or_else(|| evalhar::default_ids("d", docs.inner.rows()));
    let query_ids = query_ids.unwrap_or_else(|| evalhar::default_ids("q", queries.inner.rows()));
    let run = py
        .detach(|| evalhar::exact_search(&docs.inner, &doc_ids, &queries.inner, &query_ids, similarity, cutoff))
        .py()?;
    Ok(run.results)
}

fn qrels_from_dict(qrels: HashMap<String, HashMap<String, u32>>) -> PyResult<QrelsTable> {
    let mut table = QrelsTable::new();
    // sorted so construction does not depend on dict order
    let sorted: BTreeMap<String, BTreeMap<String, u32>> =
        qrels.into_iter().map(|(q, d)| (q, d.into_iter().collect())).collect();
    for (q, docs) in sorted {
        for (d, rel) in docs {
            table.insert(q.clone(), d, rel).py()?;
        }
    }
    Ok(table)
}

fn qrels_to_dict(table: &QrelsTable) -> BTreeMap<String, BTreeMap<String, u32>> {
    table
        .iter()
        .map(|(q, docs)| (q.to_string(), docs.iter().cloned().collect()))
        .collect()
}

/// Mean metric (`mrr_at_10`, `ndcg_at_10`, `recall_at_k`) of a search result
/// against `{query_id: {doc_id: relevance}}`.
#[pyfunction]
#[pyo3(signature = (run, qrels, metric = "ndcg_at_10", cutoff = 10))]
fn evaluate(
    run: Ranked,
    qrels: HashMap<String, HashMap<String, u32>>,
    metric: &str,
    cutoff: usize,
) -> PyResult<f64> {
    let metric: Metric = metric.parse().py()?;
    let run = RetrievalRun {
        results: run,
        cutoff,
        similarity: Similarity::Cosine,
    };
    Ok(evalhar::evaluate(&run, &qrels_from_dict(qrels)?, metric).value)
}

#[pyfunction]
fn load_qrels(path: &str) -> PyResult<BTreeMap<String, BTreeMap<String, u32>>> {
    Ok(qrels_to_dict(&matio::load_qrels(path).py()?))
}

/// Spiked-covariance retrieval task; returns `(docs, queries, qrels)` with
/// ids `d{i}` / `q{j}`.
#[pyfunction]
#[pyo3(signature = (n_docs, n_queries, dim, spikes, noise_variance = 1.0, tau = 1.0, seed = DEFAULT_SEED))]
#[allow(clippy::type_complexity)]
fn generate_synthetic(
    n_docs: usize,
    n_queries: usize,
    dim: usize,
    spikes: Vec<(usize, f64)>,
    noise_variance: f64,
    tau: f64,
    seed: u64,
) -> PyResult<(Embeddings, Embeddings, BTreeMap<String, BTreeMap<String, u32>>)> {
    let task = evalhar::generate_synthetic(&SynthSpec {
        n_docs,
        n_queries,
        dim,
        spikes,
        noise_variance,
        query_perturbation: tau,
        seed,
    })
    .py()?;
    let qrels = qrels_to_dict(&task.qrels);
    Ok((Embeddings { inner: task.docs }, Embeddings { inner: task.queries }, qrels))
}

#[pymodule]
pub fn spectemp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Embeddings>()?;
    m.add_class::<SpectralModel>()?;
    m.add_function(wrap_pyfunction!(noise_floor, m)?)?;
    m.add_function(wrap_pyfunction!(snr_profile, m)?)?;
    m.add_function(wrap_pyfunction!(detect_knee, m)?)?;
    m.add_function(wrap_pyfunction!(derive_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(exact_search, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(load_qrels, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
