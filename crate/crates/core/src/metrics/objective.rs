use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    disf_metric, diversity_range, fl_max_metric, fl_max_streaming, fl_sum_metric, pws_metric,
    quality_metric, KernelCache, QUALITY_RANGE,
};
use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiversityKind {
    Pws,
    FlSum,
    FlMax,
    Disf,
    None,
}

impl DiversityKind {
    pub fn name(self) -> &'static str {
        match self {
            DiversityKind::Pws => "pws",
            DiversityKind::FlSum => "fl_sum",
            DiversityKind::FlMax => "fl_max",
            DiversityKind::Disf => "disf",
            DiversityKind::None => "none",
        }
    }
}

impl fmt::Display for DiversityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiversityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pws" => DiversityKind::Pws,
            "fl_sum" | "fl" => DiversityKind::FlSum,
            "fl_max" => DiversityKind::FlMax,
            "disf" => DiversityKind::Disf,
            "none" => DiversityKind::None,
            _ => return Err(Error::invalid(format!("unknown diversity metric {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityKind {
    Composite,
    None,
}

/// Which `N` DiSF divides by: the corpus size (as printed) or the subset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisfNorm {
    CorpusSize,
    SubsetSize,
}

/// `f(U) = λ·f_qua(U) + (1 − λ)·f_div(U)`.
///
/// With `rescale` on (the default) each component is mapped affinely onto
/// `[0, 1]` before mixing: quality by `/15`, pws and fl_sum from
/// `[-0.5, 0.5]`, fl_max from `[-1, 1]`, and DiSF from the spread observed
/// on a warm-up sample of random subsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub lambda: f64,
    pub diversity: DiversityKind,
    pub quality: QualityKind,
    pub rescale: bool,
    pub disf_norm: DisfNorm,
}

impl Objective {
    pub fn new(lambda: f64, diversity: DiversityKind, quality: QualityKind) -> Result<Self> {
        let obj = Objective {
            lambda,
            diversity,
            quality,
            rescale: true,
            disf_norm: DisfNorm::CorpusSize,
        };
        obj.validate()?;
        Ok(obj)
    }

    /// Pure quality (`λ = 1`).
    pub fn quality_only() -> Self {
        Objective {
            lambda: 1.0,
            diversity: DiversityKind::None,
            quality: QualityKind::Composite,
            rescale: true,
            disf_norm: DisfNorm::CorpusSize,
        }
    }

    /// Pure diversity (`λ = 0`).
    pub fn diversity_only(kind: DiversityKind) -> Self {
        Objective {
            lambda: 0.0,
            diversity: kind,
            quality: QualityKind::None,
            rescale: true,
            disf_norm: DisfNorm::CorpusSize,
        }
    }

    pub fn raw(mut self) -> Self {
        self.rescale = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.uses_quality() && self.quality == QualityKind::None {
            return Err(Error::invalid("lambda > 0 needs a quality metric"));
        }
        if self.uses_diversity() && self.diversity == DiversityKind::None {
            return Err(Error::invalid("lambda < 1 needs a diversity metric"));
        }
        Ok(())
    }

    pub fn uses_quality(&self) -> bool {
        self.lambda > 0.0
    }

    pub fn uses_diversity(&self) -> bool {
        self.lambda < 1.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvaluatorOptions {
    pub gram_cap: usize,
    /// Subset size for the DiSF warm-up estimate.
    pub warmup_size: usize,
    pub warmup_subsets: usize,
    pub warmup_seed: u64,
}

impl Default for EvaluatorOptions {
    fn default() -> Self {
        EvaluatorOptions {
            gram_cap: KernelCache::DEFAULT_GRAM_CAP,
            warmup_size: 1,
            warmup_subsets: 32,
            warmup_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    /// Raw mean composite quality, when evaluated.
    pub quality: Option<f64>,
    /// Raw diversity metric value, when evaluated.
    pub diversity: Option<f64>,
    pub combined: f64,
}

/// An [`Objective`] bound to the data it is evaluated on.
#[derive(Debug)]
pub struct ObjectiveEvaluator<'a> {
    objective: Objective,
    composite: Option<&'a [f64]>,
    embeddings: Option<&'a EmbeddingMatrix>,
    cache: KernelCache,
    /// Affine source range for the diversity component.
    div_range: (f64, f64),
    n: usize,
}

impl<'a> ObjectiveEvaluator<'a> {
    pub fn new(
        objective: Objective,
        composite: Option<&'a [f64]>,
        embeddings: Option<&'a EmbeddingMatrix>,
        opts: EvaluatorOptions,
    ) -> Result<Self> {
        objective.validate()?;
        let n = match (composite, embeddings) {
            (Some(q), Some(m)) if q.len() != m.n() => {
                return Err(Error::invalid(format!(
                    "{} quality scores for {} embeddings",
                    q.len(),
                    m.n()
                )))
            }
            (_, Some(m)) => m.n(),
            (Some(q), None) => q.len(),
            (None, None) => return Err(Error::invalid("objective has no data")),
        };
        if objective.uses_quality() && composite.is_none() {
            return Err(Error::invalid("quality objective needs quality scores"));
        }
        let cache = match (objective.uses_diversity(), embeddings) {
            (false, _) => KernelCache::empty(n),
            (true, None) => return Err(Error::invalid("diversity objective needs embeddings")),
            (true, Some(m)) if objective.diversity == DiversityKind::FlMax => {
                KernelCache::build(m, opts.gram_cap)?
            }
            (true, Some(m)) => KernelCache::streaming(m)?,
        };
        let mut ev = ObjectiveEvaluator {
            objective,
            composite,
            embeddings,
            cache,
            div_range: (0.0, 1.0),
            n,
        };
        if objective.uses_diversity() {
            ev.div_range = match diversity_range(objective.diversity) {
                Some(r) => r,
                None => ev.warmup_range(opts)?,
            };
        }
        Ok(ev)
    }

    fn warmup_range(&self, opts: EvaluatorOptions) -> Result<(f64, f64)> {
        let size = opts.warmup_size.clamp(1, self.n);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.warmup_seed);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..opts.warmup_subsets.max(1) {
            let u = sample(&mut rng, self.n, size).into_vec();
            let v = self.raw_diversity(&u)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            hi = lo + 1.0;
        }
        Ok((lo, hi))
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cache(&self) -> &KernelCache {
        &self.cache
    }

    /// Source range that the diversity component is rescaled from.
    pub fn diversity_source_range(&self) -> (f64, f64) {
        self.div_range
    }

    pub fn raw_quality(&self, u: &[usize]) -> Result<f64> {
        let q = self
            .composite
            .ok_or_else(|| Error::invalid("no quality scores bound"))?;
        quality_metric(u, q)
    }

    pub fn raw_diversity(&self, u: &[usize]) -> Result<f64> {
        let m = self
            .embeddings
            .ok_or_else(|| Error::invalid("no embeddings bound"))?;
        match self.objective.diversity {
            DiversityKind::Pws => pws_metric(u, m, &self.cache),
            DiversityKind::FlSum => fl_sum_metric(u, &self.cache),
            DiversityKind::FlMax => match self.cache.gram() {
                Some(_) => fl_max_metric(u, &self.cache),
                None => fl_max_streaming(u, m),
            },
            DiversityKind::Disf => {
                let norm_n = match self.objective.disf_norm {
                    DisfNorm::CorpusSize => self.n,
                    DisfNorm::SubsetSize => u.len(),
                };
                disf_metric(u, m, norm_n.max(2))
            }
            DiversityKind::None => Err(Error::invalid("no diversity metric configured")),
        }
    }

    pub fn components(&self, u: &[usize]) -> Result<Components> {
        let lambda = self.objective.lambda;
        let quality = if self.objective.uses_quality() {
            Some(self.raw_quality(u)?)
        } else {
            None
        };
        let diversity = if self.objective.uses_diversity() {
            Some(self.raw_diversity(u)?)
        } else {
            None
        };
        let (q_scaled, d_scaled) = if self.objective.rescale {
            let (qlo, qhi) = QUALITY_RANGE;
            let (dlo, dhi) = self.div_range;
            (
                quality.map(|q| (q - qlo) / (qhi - qlo)),
                diversity.map(|d| (d - dlo) / (dhi - dlo)),
            )
        } else {
            (quality, diversity)
        };
        let combined = match (q_scaled, d_scaled) {
            (Some(q), Some(d)) => lambda * q + (1.0 - lambda) * d,
            (Some(q), None) => q,
            (None, Some(d)) => d,
            (None, None) => unreachable!("validated objective uses at least one component"),
        };
        Ok(Components {
            quality,
            diversity,
            combined,
        })
    }

    /// The combined objective value of subset `u`.
    pub fn evaluate(&self, u: &[usize]) -> Result<f64> {
        Ok(self.components(u)?.combined)
    }
}
