use std::path::Path;

use super::container::{check_payload_len, Header, HEADER_LEN};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"DMEB";
const FLAG_NORMALIZED: u32 = 1;
const UNIT_NORM_TOL: f64 = 1e-4;

/// Dense row-major `n × d` matrix of `f32` text embeddings.
///
/// Rows are always finite. When `is_normalized()` is true every row has unit
/// L2 norm (within `1e-4`), which lets cosine similarity be a dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f32>, normalized: bool) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "embedding matrix needs n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::invalid(format!(
                "embedding payload has {} values, expected {}",
                data.len(),
                n * d
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                offset: (HEADER_LEN + 4 * pos) as u64,
                row: pos / d,
                col: pos % d,
            });
        }
        let m = EmbeddingMatrix {
            n,
            d,
            data,
            normalized,
        };
        if normalized {
            for i in 0..n {
                if (m.norm(i) - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::NotNormalized);
                }
            }
        }
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != d) {
            return Err(Error::invalid("ragged embedding rows"));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(rows.len(), d, data, false)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Dot product of rows `i` and `j`, accumulated in `f64`.
    #[inline]
    pub fn dot(&self, i: usize, j: usize) -> f64 {
        dot(self.row(i), self.row(j))
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.dot(i, i).sqrt()
    }

    /// Copies the given rows into a new matrix, preserving the normalized flag.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.d);
        for &r in rows {
            if r >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: self.n,
                });
            }
            data.extend_from_slice(self.row(r));
        }
        Ok(EmbeddingMatrix {
            n: rows.len(),
            d: self.d,
            data,
            normalized: self.normalized,
        })
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Scales each row to unit L2 norm. Zero rows are rejected.
pub fn normalize_rows(mut m: EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let d = m.d;
    for (i, row) in m.data.chunks_exact_mut(d).enumerate() {
        let norm = row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNormRow { row: i });
        }
        for x in row.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
    m.normalized = true;
    Ok(m)
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data.len());
    Header {
        magic: *EMBEDDING_MAGIC,
        n: m.n as u64,
        d: m.d as u32,
        flags: if m.normalized { FLAG_NORMALIZED } else { 0 },
    }
    .encode(&mut out);
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let header = Header::decode(bytes, EMBEDDING_MAGIC)?;
    let (n, d) = (header.n as usize, header.d as usize);
    let count = header
        .n
        .checked_mul(header.d as u64)
        .ok_or_else(|| Error::invalid("n*d overflows"))?;
    check_payload_len(bytes, count * 4)?;
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(n, d, data, header.flags & FLAG_NORMALIZED != 0)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes)
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_embeddings(m)).map_err(|e| Error::io(path, e))
}
