use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Graded relevance judgments, keyed by query id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelsTable {
    entries: BTreeMap<String, Vec<(String, u32)>>,
}

impl QrelsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        query: impl Into<String>,
        doc: impl Into<String>,
        rel: u32,
    ) -> Result<()> {
        let query = query.into();
        let doc = doc.into();
        let list = self.entries.entry(query.clone()).or_default();
        if list.iter().any(|(d, _)| *d == doc) {
            return Err(Error::Duplicate { query, doc });
        }
        list.push((doc, rel));
        Ok(())
    }

    pub fn get(&self, query: &str) -> Option<&[(String, u32)]> {
        self.entries.get(query).map(Vec::as_slice)
    }

    pub fn relevance(&self, query: &str, doc: &str) -> u32 {
        self.get(query)
            .and_then(|l| l.iter().find(|(d, _)| d == doc))
            .map_or(0, |(_, r)| *r)
    }

    pub fn has_positive(&self, query: &str) -> bool {
        self.get(query)
            .is_some_and(|l| l.iter().any(|(_, r)| *r > 0))
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, u32)])> {
        self.entries.iter().map(|(q, l)| (q.as_str(), l.as_slice()))
    }

    /// Renders as 4-column TREC text (`qid 0 docid rel`).
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (q, list) in &self.entries {
            for (d, r) in list {
                out.push_str(&format!("{q} 0 {d} {r}\n"));
            }
        }
        out
    }
}

/// Parses `qid docid rel` or `qid iter docid rel` lines. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_qrels(text: &str) -> Result<QrelsTable> {
    let mut table = QrelsTable::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        let (q, d, rel) = match cols.as_slice() {
            [q, d, rel] => (*q, *d, *rel),
            [q, _, d, rel] => (*q, *d, *rel),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 3 or 4 columns, found {}", cols.len()),
                })
            }
        };
        let rel: i64 = rel.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("relevance {rel:?} is not an integer"),
        })?;
        if rel < 0 || rel > i64::from(u32::MAX) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("relevance {rel} out of range"),
            });
        }
        if !seen.insert((q.to_string(), d.to_string())) {
            return Err(Error::Duplicate {
                query: q.to_string(),
                doc: d.to_string(),
            });
        }
        table.insert(q, d, rel as u32)?;
    }
    Ok(table)
}

pub fn load_qrels(path: impl AsRef<Path>) -> Result<QrelsTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qrels(&text)
}
