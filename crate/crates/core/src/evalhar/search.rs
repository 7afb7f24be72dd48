use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matio::EmbeddingMatrix;

pub const DEFAULT_CUTOFF: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Cosine,
    Dot,
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::Cosine => "cosine",
            Similarity::Dot => "dot",
        })
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "dot" => Ok(Similarity::Dot),
            _ => Err(Error::Config(format!("unknown similarity {s:?}"))),
        }
    }
}

/// Ranked results per query: score descending, ties by doc id ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalRun {
    pub results: BTreeMap<String, Vec<(String, f32)>>,
    pub cutoff: usize,
    pub similarity: Similarity,
}

impl RetrievalRun {
    pub fn ranked(&self, query: &str) -> Option<&[(String, f32)]> {
        self.results.get(query).map(Vec::as_slice)
    }
}

/// Eight-lane f32 dot product.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

fn prepared(m: &EmbeddingMatrix, similarity: Similarity) -> EmbeddingMatrix {
    let mut m = m.clone();
    if similarity == Similarity::Cosine {
        m.l2_normalize_rows();
    }
    m
}

/// Similarity of two raw vectors as used by [`exact_search`]: cosine
/// normalizes both (zero vectors score 0), dot uses them as they are.
pub fn similarity_score(a: &[f32], b: &[f32], similarity: Similarity) -> f32 {
    match similarity {
        Similarity::Dot => dot(a, b),
        Similarity::Cosine => {
            let mut a = a.to_vec();
            let mut b = b.to_vec();
            crate::matio::normalize_in_place(&mut a);
            crate::matio::normalize_in_place(&mut b);
            dot(&a, &b)
        }
    }
}

/// Brute-force top-`cutoff` retrieval for every query.
pub fn exact_search(
    docs: &EmbeddingMatrix,
    doc_ids: &[String],
    queries: &EmbeddingMatrix,
    query_ids: &[String],
    similarity: Similarity,
    cutoff: usize,
) -> Result<RetrievalRun> {
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
    if cutoff == 0 {
        return Err(Error::Config("cutoff must be at least 1".into()));
    }

    // position of each doc in id order, so ties compare as integers
    let mut by_id: Vec<usize> = (0..doc_ids.len()).collect();
    by_id.sort_by(|&a, &b| doc_ids[a].cmp(&doc_ids[b]));
    let mut id_rank = vec![0u32; doc_ids.len()];
    for (r, &i) in by_id.iter().enumerate() {
        id_rank[i] = r as u32;
    }

    let docs = prepared(docs, similarity);
    let queries = prepared(queries, similarity);
    let n = docs.rows();
    let keep = cutoff.min(n);
    let full_sort = keep * 4 >= n;

    let order = |a: &(f32, u32), b: &(f32, u32)| -> Ordering {
        b.0.total_cmp(&a.0)
            .then_with(|| id_rank[a.1 as usize].cmp(&id_rank[b.1 as usize]))
    };

    let ranked: Vec<Vec<(f32, u32)>> = queries
        .as_slice()
        .par_chunks(queries.dim())
        .map(|q| {
            if full_sort {
                let mut all: Vec<(f32, u32)> = docs
                    .iter_rows()
                    .enumerate()
                    .map(|(i, d)| (dot(q, d), i as u32))
                    .collect();
                all.sort_by(order);
                all.truncate(keep);
                all
            } else {
                let mut top: Vec<(f32, u32)> = Vec::with_capacity(keep + 1);
                for (i, d) in docs.iter_rows().enumerate() {
                    let cand = (dot(q, d), i as u32);
                    if top.len() == keep && order(&cand, &top[keep - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = top
                        .binary_search_by(|probe| order(probe, &cand))
                        .unwrap_or_else(|p| p);
                    top.insert(pos, cand);
                    top.truncate(keep);
                }
                top
            }
        })
        .collect();

    let results = query_ids
        .iter()
        .zip(ranked)
        .map(|(qid, list)| {
            let list = list
                .into_iter()
                .map(|(s, i)| (doc_ids[i as usize].clone(), s))
                .collect();
            (qid.clone(), list)
        })
        .collect();
    Ok(RetrievalRun {
        results,
        cutoff,
        similarity,
    })
}
