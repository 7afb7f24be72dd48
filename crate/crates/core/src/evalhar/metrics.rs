use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::search::RetrievalRun;
use crate::error::{Error, Result};
use crate::matio::QrelsTable;

const METRIC_DEPTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MrrAt10,
    NdcgAt10,
    /// Recall at the run's cutoff.
    RecallAtK,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MrrAt10 => "mrr_at_10",
            Metric::NdcgAt10 => "ndcg_at_10",
            Metric::RecallAtK => "recall_at_k",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mrr_at_10" | "mrr@10" | "mrr" => Ok(Metric::MrrAt10),
            "ndcg_at_10" | "ndcg@10" | "ndcg" => Ok(Metric::NdcgAt10),
            "recall_at_k" | "recall" => Ok(Metric::RecallAtK),
            _ => Err(Error::Config(format!("unknown metric {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOutcome {
    pub value: f64,
    /// Queries that contributed to the mean.
    pub evaluated: usize,
    /// Run queries absent from the qrels.
    pub missing: usize,
    /// Run queries judged but without any positive document.
    pub no_positive: usize,
}

/// Mean of a per-query score over run queries that have at least one
/// positive judgment.
fn mean_over_judged<F>(run: &RetrievalRun, qrels: &QrelsTable, per_query: F) -> MetricOutcome
where
    F: Fn(&[(String, f32)], &[(String, u32)]) -> f64,
{
    let mut sum = 0.0;
    let mut out = MetricOutcome {
        value: 0.0,
        evaluated: 0,
        missing: 0,
        no_positive: 0,
    };
    for (qid, ranked) in &run.results {
        let Some(judged) = qrels.get(qid) else {
            out.missing += 1;
            continue;
        };
        if !judged.iter().any(|(_, r)| *r > 0) {
            out.no_positive += 1;
            continue;
        }
        sum += per_query(ranked, judged);
        out.evaluated += 1;
    }
    if out.evaluated > 0 {
        out.value = sum / out.evaluated as f64;
    }
    out
}

fn rel_of(judged: &[(String, u32)], doc: &str) -> u32 {
    judged
        .iter()
        .find(|(d, _)| d == doc)
        .map_or(0, |(_, r)| *r)
}

fn gain(rel: u32) -> f64 {
    2f64.powi(rel as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

pub fn reciprocal_rank(ranked: &[(String, f32)], judged: &[(String, u32)]) -> f64 {
    ranked
        .iter()
        .take(METRIC_DEPTH)
        .position(|(d, _)| rel_of(judged, d) > 0)
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

pub fn ndcg(ranked: &[(String, f32)], judged: &[(String, u32)]) -> f64 {
    let dcg: f64 = ranked
        .iter()
        .take(METRIC_DEPTH)
        .enumerate()
        .map(|(i, (d, _))| gain(rel_of(judged, d)) / discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = judged.iter().map(|(_, r)| *r).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(METRIC_DEPTH)
        .enumerate()
        .map(|(i, &r)| gain(r) / discount(i + 1))
        .sum();
    if idcg > 0.0 {
        dcg / idcg
    } else {
        0.0
    }
}

pub fn recall(ranked: &[(String, f32)], judged: &[(String, u32)]) -> f64 {
    let positives = judged.iter().filter(|(_, r)| *r > 0).count();
    let hits = ranked
        .iter()
        .filter(|(d, _)| rel_of(judged, d) > 0)
        .count();
    hits as f64 / positives as f64
}

pub fn evaluate(run: &RetrievalRun, qrels: &QrelsTable, metric: Metric) -> MetricOutcome {
    match metric {
        Metric::MrrAt10 => mean_over_judged(run, qrels, reciprocal_rank),
        Metric::NdcgAt10 => mean_over_judged(run, qrels, ndcg),
        Metric::RecallAtK => mean_over_judged(run, qrels, recall),
    }
}

pub fn mrr_at_10(run: &RetrievalRun, qrels: &QrelsTable) -> f64 {
    evaluate(run, qrels, Metric::MrrAt10).value
}

pub fn ndcg_at_10(run: &RetrievalRun, qrels: &QrelsTable) -> f64 {
    evaluate(run, qrels, Metric::NdcgAt10).value
}

pub fn recall_at_k(run: &RetrievalRun, qrels: &QrelsTable) -> f64 {
    evaluate(run, qrels, Metric::RecallAtK).value
}
