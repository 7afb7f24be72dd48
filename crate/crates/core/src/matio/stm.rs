//! `STM1` model container, little-endian:
//!
//! ```text
//! b"STM1" | u32 version=1 | u64 d
//! f64 tail_fraction | u64 sample_cap | u64 sample_count | u64 seed
//! f64 mean[d] | f64 eigenvalues[d] (descending) | f64 eigenvectors[d*d] (column-major)
//! f64 noise_floor | f64 snr[d] | u64 knee_index (1-based, 0 = none) | f64 reference_snr
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::CovarianceSpectrum;
use crate::tempering::{SnrProfile, SpectralModel};

const MAGIC: &[u8; 4] = b"STM1";
const VERSION: u32 = 1;
/// Header and scalar fields: magic, version, d, four fit fields, noise
/// floor, knee index and reference SNR.
const FIXED_BYTES: u64 = 4 + 4 + 8 + 4 * 8 + 3 * 8;

pub fn encode_model(model: &SpectralModel) -> Vec<u8> {
    let s = &model.spectrum;
    let p = &model.profile;
    let d = s.dim();
    let mut out = Vec::with_capacity(64 + 8 * (d * d + 4 * d));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.extend_from_slice(&p.tail_fraction.to_le_bytes());
    out.extend_from_slice(&(model.sample_cap as u64).to_le_bytes());
    out.extend_from_slice(&(s.sample_count as u64).to_le_bytes());
    out.extend_from_slice(&s.sample_seed.to_le_bytes());
    for block in [&s.mean, &s.eigenvalues, &s.eigenvectors] {
        for v in block.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&p.noise_floor.to_le_bytes());
    for v in &p.snr {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(p.knee_index.unwrap_or(0) as u64).to_le_bytes());
    out.extend_from_slice(&p.reference_snr.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("model file truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SpectralModel> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing STM1 magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported STM1 version {version}")));
    }
    let d = r.u64()?;
    if d == 0 {
        return Err(Error::Format("model dimension is zero".into()));
    }
    // exact size is known from d; reject mismatches before allocating
    let expected = d
        .checked_mul(d)
        .and_then(|dd| dd.checked_add(3 * d))
        .and_then(|w| w.checked_mul(8))
        .and_then(|w| w.checked_add(FIXED_BYTES));
    match expected {
        Some(n) if n == bytes.len() as u64 => {}
        Some(n) if n < bytes.len() as u64 => {
            return Err(Error::Format(format!(
                "{} trailing bytes after model",
                bytes.len() as u64 - n
            )))
        }
        _ => return Err(Error::Format("model file truncated".into())),
    }
    let d = d as usize;
    let tail_fraction = r.f64()?;
    let sample_cap = r.u64()? as usize;
    let sample_count = r.u64()? as usize;
    let sample_seed = r.u64()?;
    let mean = r.f64s(d)?;
    let eigenvalues = r.f64s(d)?;
    let eigenvectors = r.f64s(d * d)?;
    let noise_floor = r.f64()?;
    let snr = r.f64s(d)?;
    let knee = r.u64()?;
    let reference_snr = r.f64()?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after model",
            bytes.len() - r.pos
        )));
    }

    let all_finite = [&mean, &eigenvalues, &eigenvectors, &snr]
        .iter()
        .all(|v| v.iter().all(|x| x.is_finite()))
        && noise_floor.is_finite()
        && reference_snr.is_finite()
        && tail_fraction.is_finite();
    if !all_finite {
        return Err(Error::Corrupt("non-finite value in model".into()));
    }
    if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Corrupt("eigenvalues are not in descending order".into()));
    }
    if eigenvalues.iter().any(|&l| l < 0.0) {
        return Err(Error::Corrupt("negative eigenvalue".into()));
    }
    if knee as usize > d {
        return Err(Error::Corrupt(format!("knee index {knee} exceeds dimension {d}")));
    }

    Ok(SpectralModel {
        spectrum: CovarianceSpectrum {
            mean,
            eigenvalues,
            eigenvectors,
            sample_count,
            sample_seed,
        },
        profile: SnrProfile {
            noise_floor,
            snr,
            tail_fraction,
            knee_index: (knee > 0).then_some(knee as usize),
            reference_snr,
        },
        sample_cap,
    })
}

pub fn save_model(model: &SpectralModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SpectralModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
