//! Embedding matrices, relevance judgments and the on-disk formats for both,
//! plus persistence of fitted spectral models.
//!
//! Two binary containers are defined here, both little-endian:
//!
//! * `EMBF` embedding files: `b"EMBF"`, `u32` version (1), `u64` rows,
//!   `u64` dim, `u8` dtype code (0 = float32), then `rows * dim` float32
//!   values in row-major order.
//! * `STM1` model files, see [`save_model`].

mod embf;
mod qrels;
mod stm;

pub use embf::{decode_embeddings, encode_embeddings, load_embeddings, save_embeddings};
pub use qrels::{load_qrels, parse_qrels, QrelsTable};
pub use stm::{decode_model, encode_model, load_model, save_model};

use crate::error::{Error, Result};

/// A dense `rows x dim` float32 matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    label: Option<String>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data. Rejects empty shapes, a data
    /// length that does not match the shape, and non-finite values.
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::Shape(format!(
                "matrix must have at least one row and one column, got {rows}x{dim}"
            )));
        }
        let expected = rows
            .checked_mul(dim)
            .ok_or_else(|| Error::Shape(format!("{rows}x{dim} overflows")))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{rows}x{dim} matrix needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            rows,
            dim,
            data,
            label: None,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Keeps the rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            dim: self.dim,
            data,
            label: self.label.clone(),
        }
    }

    /// Keeps the columns at `indices`, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for row in self.iter_rows() {
            data.extend(indices.iter().map(|&c| row[c]));
        }
        Self {
            rows: self.rows,
            dim: indices.len(),
            data,
            label: self.label.clone(),
        }
    }

    /// Scales every row to unit L2 norm; all-zero rows are left untouched.
    pub fn l2_normalize_rows(&mut self) {
        for row in self.data.chunks_exact_mut(self.dim) {
            normalize_in_place(row);
        }
    }

    /// Unchecked constructor for internal producers that already uphold the
    /// invariants (finite values, consistent shape).
    pub(crate) fn from_parts(rows: usize, dim: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), rows * dim);
        debug_assert!(rows > 0 && dim > 0);
        Self {
            rows,
            dim,
            data,
            label: None,
        }
    }
}

pub(crate) fn normalize_in_place(row: &mut [f32]) {
    let norm = row
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        for v in row.iter_mut() {
            *v = (f64::from(*v) / norm) as f32;
        }
    }
}
