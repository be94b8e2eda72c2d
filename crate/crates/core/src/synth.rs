//! Seeded synthetic corpora for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{normalize_rows, EmbeddingMatrix, RawScores};

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn finish(n: usize, d: usize, data: Vec<f32>) -> EmbeddingMatrix {
    let m = EmbeddingMatrix::new(n, d, data, false).expect("synthetic rows are finite");
    normalize_rows(m).expect("gaussian rows are nonzero")
}

/// Isotropic Gaussian rows, unit-normalized.
pub fn random_unit_embeddings(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| gaussian(&mut rng) as f32).collect();
    finish(n, d, data)
}

/// Rows drawn around `clusters` random centers with per-coordinate noise
/// `spread`, unit-normalized. Sample `i` belongs to cluster `i % clusters`.
pub fn clustered_embeddings(
    n: usize,
    d: usize,
    clusters: usize,
    spread: f64,
    seed: u64,
) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = clusters.max(1);
    let centers: Vec<f64> = (0..clusters * d)
        .map(|_| gaussian(&mut rng) / (d as f64).sqrt())
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = &centers[(i % clusters) * d..(i % clusters + 1) * d];
        for &cj in c {
            data.push((cj + spread * gaussian(&mut rng) / (d as f64).sqrt()) as f32);
        }
    }
    finish(n, d, data)
}

/// Rows sharing one common direction with weight `shared` plus isotropic
/// noise. Larger `shared` means higher average pairwise cosine; the expected
/// cosine is about `shared² / (shared² + 1)`. The noise weight also varies
/// per row, so some rows sit closer to the common direction than others.
pub fn anchored_embeddings(n: usize, d: usize, shared: f64, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
    let cn = common.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let noise_scale = rng.random_range(0.5..1.5) / (d as f64).sqrt();
        for &c in &common {
            data.push((shared * c / cn + noise_scale * gaussian(&mut rng)) as f32);
        }
    }
    finish(n, d, data)
}

/// Correlated raw `(dclm, edu, wiki)` triples driven by one latent quality.
/// Edu is concentrated at the low end of `[0, 5]`, like web-crawl scores.
pub fn raw_quality_scores(n: usize, seed: u64) -> Vec<RawScores> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let latent = gaussian(&mut rng);
            let edu = (1.2 + 0.9 * latent + 0.4 * gaussian(&mut rng)).clamp(0.0, 5.0);
            RawScores {
                dclm: latent + 0.6 * gaussian(&mut rng),
                edu,
                wiki: 0.7 * latent + 0.7 * gaussian(&mut rng),
            }
        })
        .collect()
}

/// Composite scores uniform on `[0, 15]`.
pub fn uniform_composites(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.0..15.0)).collect()
}

/// Log-normal token counts.
pub fn token_lengths(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (6.0 + 0.8 * gaussian(&mut rng)).exp().round().max(1.0))
        .collect()
}
