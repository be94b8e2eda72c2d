//! Quality and diversity set functions over index subsets.
//!
//! All evaluators accumulate in `f64` and take subsets as slices of row
//! indices into the corpus they were built for. Cosine similarity is the
//! kernel throughout, so the embedding matrix must be unit-normalized.

mod objective;

pub use objective::{
    Components, DisfNorm, DiversityKind, EvaluatorOptions, Objective, ObjectiveEvaluator,
    QualityKind,
};

use crate::corpus::{dot, EmbeddingMatrix, COMPOSITE_MAX};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    FullGram,
    OnTheFly,
}

/// Precomputed kernel data for one corpus.
///
/// `column_sums[j] = Σ_i K(z_i, z_j)` is always cheap (`O(n·d)`, via the sum
/// of all rows), so it is built in both modes. The full gram is only built on
/// request and only for `n <= gram_cap`.
#[derive(Debug, Clone)]
pub struct KernelCache {
    mode: CacheMode,
    n: usize,
    gram: Option<Vec<f64>>,
    column_sums: Option<Vec<f64>>,
}

impl KernelCache {
    pub const DEFAULT_GRAM_CAP: usize = 20_000;

    /// Column sums plus, when `n <= gram_cap`, the full gram.
    pub fn build(m: &EmbeddingMatrix, gram_cap: usize) -> Result<Self> {
        let mut cache = Self::streaming(m)?;
        if m.n() <= gram_cap {
            let n = m.n();
            let mut gram = vec![0.0; n * n];
            for i in 0..n {
                gram[i * n + i] = m.dot(i, i);
                for j in (i + 1)..n {
                    let k = m.dot(i, j);
                    gram[i * n + j] = k;
                    gram[j * n + i] = k;
                }
            }
            cache.gram = Some(gram);
            cache.mode = CacheMode::FullGram;
        }
        Ok(cache)
    }

    /// Column sums only; pairwise kernels are computed on demand.
    pub fn streaming(m: &EmbeddingMatrix) -> Result<Self> {
        m.require_normalized()?;
        let d = m.d();
        let mut total = vec![0.0f64; d];
        for i in 0..m.n() {
            for (t, &x) in total.iter_mut().zip(m.row(i)) {
                *t += x as f64;
            }
        }
        let column_sums = (0..m.n())
            .map(|j| {
                m.row(j)
                    .iter()
                    .zip(&total)
                    .map(|(&x, &t)| x as f64 * t)
                    .sum()
            })
            .collect();
        Ok(KernelCache {
            mode: CacheMode::OnTheFly,
            n: m.n(),
            gram: None,
            column_sums: Some(column_sums),
        })
    }

    /// A cache with nothing materialized.
    pub fn empty(n: usize) -> Self {
        KernelCache {
            mode: CacheMode::OnTheFly,
            n,
            gram: None,
            column_sums: None,
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gram(&self) -> Option<&[f64]> {
        self.gram.as_deref()
    }

    pub fn column_sums(&self) -> Option<&[f64]> {
        self.column_sums.as_deref()
    }

    #[inline]
    pub fn kernel(&self, m: &EmbeddingMatrix, i: usize, j: usize) -> f64 {
        match &self.gram {
            Some(g) => g[i * self.n + j],
            None => m.dot(i, j),
        }
    }
}

pub(crate) fn check_subset(u: &[usize], n: usize) -> Result<()> {
    if u.is_empty() {
        return Err(Error::EmptySubset);
    }
    match u.iter().find(|&&i| i >= n) {
        Some(&index) => Err(Error::IndexOutOfRange { index, len: n }),
        None => Ok(()),
    }
}

/// Mean composite quality of the subset.
pub fn quality_metric(u: &[usize], composite: &[f64]) -> Result<f64> {
    check_subset(u, composite.len())?;
    Ok(u.iter().map(|&i| composite[i]).sum::<f64>() / u.len() as f64)
}

/// `-(1/(2S²)) Σ_{i∈U} Σ_{j∈U} K(z_i, z_j)`, diagonal included.
pub fn pws_metric(u: &[usize], m: &EmbeddingMatrix, cache: &KernelCache) -> Result<f64> {
    m.require_normalized()?;
    check_subset(u, m.n())?;
    let s = u.len() as f64;
    let mass = match cache.gram() {
        // Pairwise lookups beat the d-wide sum vector only for small subsets.
        Some(g) if u.len() < m.d() => {
            let n = cache.n;
            u.iter()
                .map(|&i| u.iter().map(|&j| g[i * n + j]).sum::<f64>())
                .sum()
        }
        // For the dot-product kernel the double sum is ‖Σ z_i‖².
        _ => {
            let mut acc = vec![0.0f64; m.d()];
            for &i in u {
                for (a, &x) in acc.iter_mut().zip(m.row(i)) {
                    *a += x as f64;
                }
            }
            acc.iter().map(|a| a * a).sum::<f64>()
        }
    };
    Ok(-mass / (2.0 * s * s))
}

/// `(1/(2NS)) Σ_{i∈D} Σ_{j∈U} K(z_i, z_j)`, via the cached column sums.
pub fn fl_sum_metric(u: &[usize], cache: &KernelCache) -> Result<f64> {
    let sums = cache
        .column_sums()
        .ok_or(Error::MissingCache("column sums"))?;
    check_subset(u, sums.len())?;
    let total: f64 = u.iter().map(|&j| sums[j]).sum();
    Ok(total / (2.0 * cache.n as f64 * u.len() as f64))
}

/// `(1/N) Σ_{i∈D} max_{j∈U} K(z_i, z_j)`, from the full gram.
pub fn fl_max_metric(u: &[usize], cache: &KernelCache) -> Result<f64> {
    let g = cache.gram().ok_or(Error::MissingCache("gram"))?;
    let n = cache.n;
    check_subset(u, n)?;
    let total: f64 = (0..n)
        .map(|i| {
            let row = &g[i * n..(i + 1) * n];
            u.iter().map(|&j| row[j]).fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    Ok(total / n as f64)
}

/// Same value as [`fl_max_metric`], computing kernels on the fly.
pub fn fl_max_streaming(u: &[usize], m: &EmbeddingMatrix) -> Result<f64> {
    m.require_normalized()?;
    check_subset(u, m.n())?;
    let total: f64 = (0..m.n())
        .map(|i| {
            let zi = m.row(i);
            u.iter()
                .map(|&j| dot(zi, m.row(j)))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    Ok(total / m.n() as f64)
}

/// `-‖(1/(norm_n − 1)) Σ_{i∈U} z_i z_iᵀ‖_F`.
pub fn disf_metric(u: &[usize], m: &EmbeddingMatrix, norm_n: usize) -> Result<f64> {
    m.require_normalized()?;
    check_subset(u, m.n())?;
    if norm_n < 2 {
        return Err(Error::invalid(format!(
            "DiSF normalization needs N >= 2, got {norm_n}"
        )));
    }
    Ok(-disf_frobenius_sq(u, m).sqrt() / (norm_n - 1) as f64)
}

/// `‖Σ_{i∈U} z_i z_iᵀ‖_F²`, by whichever of the two exact routes is cheaper.
pub(crate) fn disf_frobenius_sq(u: &[usize], m: &EmbeddingMatrix) -> f64 {
    let d = m.d();
    if u.len() < d {
        // Σ_{i,j} (z_i·z_j)²
        let mut total = 0.0;
        for (a, &i) in u.iter().enumerate() {
            total += m.dot(i, i).powi(2);
            for &j in &u[a + 1..] {
                total += 2.0 * m.dot(i, j).powi(2);
            }
        }
        total
    } else {
        // Upper triangle of the d×d accumulation.
        let mut acc = vec![0.0f64; d * d];
        for &i in u {
            let z = m.row(i);
            for a in 0..d {
                let za = z[a] as f64;
                let row = &mut acc[a * d..(a + 1) * d];
                for b in a..d {
                    row[b] += za * z[b] as f64;
                }
            }
        }
        let mut total = 0.0;
        for a in 0..d {
            total += acc[a * d + a].powi(2);
            for b in (a + 1)..d {
                total += 2.0 * acc[a * d + b].powi(2);
            }
        }
        total
    }
}

/// Theoretical `[lo, hi]` of a diversity metric on unit rows, where one exists.
pub fn diversity_range(kind: DiversityKind) -> Option<(f64, f64)> {
    match kind {
        DiversityKind::Pws | DiversityKind::FlSum => Some((-0.5, 0.5)),
        DiversityKind::FlMax => Some((-1.0, 1.0)),
        DiversityKind::Disf | DiversityKind::None => None,
    }
}

pub const QUALITY_RANGE: (f64, f64) = (0.0, COMPOSITE_MAX);
