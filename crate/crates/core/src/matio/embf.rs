use std::fs;
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMBF";
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1;

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u64).to_le_bytes());
    out.push(DTYPE_F32);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing EMBF magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "EMBF header truncated ({} bytes)",
            bytes.len()
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported EMBF version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let dtype = bytes[24];
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported EMBF dtype code {dtype}")));
    }
    if rows == 0 || dim == 0 {
        return Err(Error::Format(format!("empty EMBF shape {rows}x{dim}")));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("EMBF shape {rows}x{dim} overflows")))?;
    if payload.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len() as u64,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(rows as usize, dim as usize, data)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_embeddings(&bytes)?.with_label(path.display().to_string()))
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_embeddings(m)).map_err(|e| Error::io(path, e))
}
