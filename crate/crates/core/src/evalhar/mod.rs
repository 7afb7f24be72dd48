//! Exact-search retrieval evaluation: brute-force ranking, MRR@10 /
//! nDCG@10 / recall, synthetic spiked-covariance tasks, the oracle gamma
//! grid search and the method x dimension x seed report matrix.

mod grid;
mod metrics;
mod report;
mod search;
mod synth;

pub use grid::{grid_search_gamma, grid_values, GridResult};
pub use metrics::{
    evaluate, mrr_at_10, ndcg, ndcg_at_10, recall, recall_at_k, reciprocal_rank, Metric,
    MetricOutcome,
};
pub use report::{
    run_matrix, tail_sensitivity, EvalConfig, EvalReport, Method, ReportRow, SensitivityReport,
    SensitivityRow,
};
pub use search::{dot, exact_search, similarity_score, RetrievalRun, Similarity, DEFAULT_CUTOFF};
pub use synth::{default_ids, generate_synthetic, random_orthogonal, SynthSpec};

use crate::error::{Error, Result};
use crate::matio::{EmbeddingMatrix, QrelsTable};
use crate::tempering::Compressor;

/// Documents, queries and judgments for one retrieval task.
#[derive(Debug, Clone)]
pub struct RetrievalTask {
    pub docs: EmbeddingMatrix,
    pub doc_ids: Vec<String>,
    pub queries: EmbeddingMatrix,
    pub query_ids: Vec<String>,
    pub qrels: QrelsTable,
}

impl RetrievalTask {
    /// Ids default to `d{row}` / `q{row}`.
    pub fn new(docs: EmbeddingMatrix, queries: EmbeddingMatrix, qrels: QrelsTable) -> Result<Self> {
        let doc_ids = default_ids("d", docs.rows());
        let query_ids = default_ids("q", queries.rows());
        Self::with_ids(docs, doc_ids, queries, query_ids, qrels)
    }

    pub fn with_ids(
        docs: EmbeddingMatrix,
        doc_ids: Vec<String>,
        queries: EmbeddingMatrix,
        query_ids: Vec<String>,
        qrels: QrelsTable,
    ) -> Result<Self> {
        if docs.dim() != queries.dim() {
            return Err(Error::Shape(format!(
                "documents have {} dimensions, queries {}",
                docs.dim(),
                queries.dim()
            )));
        }
        if doc_ids.len() != docs.rows() || query_ids.len() != queries.rows() {
            return Err(Error::Shape("id lists do not match matrix rows".into()));
        }
        Ok(Self {
            docs,
            doc_ids,
            queries,
            query_ids,
            qrels,
        })
    }

    pub fn dim(&self) -> usize {
        self.docs.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub similarity: Similarity,
    pub cutoff: usize,
    pub metric: Metric,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            similarity: Similarity::Cosine,
            cutoff: DEFAULT_CUTOFF,
            metric: Metric::NdcgAt10,
        }
    }
}

/// Compresses both sides with the same compressor and ranks exactly.
pub fn search_compressed(
    compressor: &dyn Compressor,
    task: &RetrievalTask,
    similarity: Similarity,
    cutoff: usize,
) -> Result<RetrievalRun> {
    let docs = compressor.compress(&task.docs)?;
    let queries = compressor.compress(&task.queries)?;
    exact_search(&docs, &task.doc_ids, &queries, &task.query_ids, similarity, cutoff)
}

pub fn score_compressor(
    compressor: &dyn Compressor,
    task: &RetrievalTask,
    settings: &EvalSettings,
) -> Result<f64> {
    let run = search_compressed(compressor, task, settings.similarity, settings.cutoff)?;
    Ok(evaluate(&run, &task.qrels, settings.metric).value)
}

/// Score on the raw, uncompressed embeddings.
pub fn score_uncompressed(task: &RetrievalTask, settings: &EvalSettings) -> Result<f64> {
    let run = exact_search(
        &task.docs,
        &task.doc_ids,
        &task.queries,
        &task.query_ids,
        settings.similarity,
        settings.cutoff,
    )?;
    Ok(evaluate(&run, &task.qrels, settings.metric).value)
}
