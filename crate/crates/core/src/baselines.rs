//! Reference selectors: exhaustive search, greedy maximizers, quality
//! top-k and a near-duplicate filter.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use itertools::Itertools;
use rayon::prelude::*;

use crate::analysis::kmeans;
use crate::corpus::{dot, write_text, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::metrics::{check_subset, disf_metric, DiversityKind, KernelCache, ObjectiveEvaluator};

/// Subsets `exhaustive_optimum` will enumerate at most.
pub const COMBINATORIAL_CAP: u128 = 1_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc·(n−i) is divisible by i+1; dividing by the gcd first keeps it exact.
        let (num, den) = ((n - i) as u128, (i + 1) as u128);
        let g = gcd(acc, den);
        match (acc / g).checked_mul(num) {
            Some(x) => acc = x / (den / g),
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Best subset of size `budget` by brute force; ties go to the
/// lexicographically first subset.
pub fn exhaustive_optimum(ev: &ObjectiveEvaluator<'_>, budget: usize) -> Result<(Vec<usize>, f64)> {
    let n = ev.n();
    if budget < 1 || budget > n {
        return Err(Error::BudgetTooLarge {
            budget,
            available: n,
        });
    }
    let count = binomial(n, budget);
    if count > COMBINATORIAL_CAP {
        return Err(Error::CombinatorialCap {
            n,
            k: budget,
            count,
            cap: COMBINATORIAL_CAP,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for u in (0..n).combinations(budget) {
        let v = ev.evaluate(&u)?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((u, v));
        }
    }
    Ok(best.expect("at least one subset"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    /// Chosen rows in pick order.
    pub order: Vec<usize>,
    /// Raw metric value after each pick.
    pub trajectory: Vec<f64>,
}

impl GreedyResult {
    pub fn selected(&self) -> Vec<usize> {
        let mut s = self.order.clone();
        s.sort_unstable();
        s
    }

    pub fn value(&self) -> f64 {
        *self.trajectory.last().expect("non-empty greedy run")
    }
}

/// Running state of a pws or DiSF greedy run.
#[derive(Debug, Clone)]
pub struct GreedyState {
    pub chosen: Vec<usize>,
    taken: Vec<bool>,
    acc: Accumulators,
}

#[derive(Debug, Clone)]
enum Accumulators {
    /// `sim[j] = Σ_{i∈chosen} K(i, j)` and the chosen pair mass.
    Pws { sim: Vec<f64>, mass: f64 },
    /// `cap[j] = z_jᵀ A z_j` with `A = Σ_{i∈chosen} z_i z_iᵀ`, and `‖A‖_F²`.
    Disf { cap: Vec<f64>, frob: f64 },
}

impl GreedyState {
    /// Raw metric value of `chosen`, from the accumulators alone.
    fn value(&self, n: usize) -> f64 {
        let k = self.chosen.len() as f64;
        match &self.acc {
            Accumulators::Pws { mass, .. } => -mass / (2.0 * k * k),
            Accumulators::Disf { frob, .. } => -frob.max(0.0).sqrt() / (n.max(2) - 1) as f64,
        }
    }
}

/// Greedy maximization of one diversity metric, ties to the lower row.
///
/// pws adds the candidate with the least added similarity mass, fl_max
/// uses lazy evaluation of coverage gains, fl_sum is modular and takes the
/// top column sums directly, and DiSF adds the candidate with the least
/// increase of `‖A‖_F²` (`2 zᵀAz + ‖z‖⁴`). DiSF values divide by `n − 1`.
pub fn greedy_select(
    m: &EmbeddingMatrix,
    kind: DiversityKind,
    budget: usize,
) -> Result<GreedyResult> {
    greedy_with(m, kind, budget, None)
}

/// Like [`greedy_select`], reusing a prebuilt cache (the gram helps fl_max).
pub fn greedy_with(
    m: &EmbeddingMatrix,
    kind: DiversityKind,
    budget: usize,
    cache: Option<&KernelCache>,
) -> Result<GreedyResult> {
    m.require_normalized()?;
    let n = m.n();
    if budget < 1 || budget > n {
        return Err(Error::BudgetTooLarge {
            budget,
            available: n,
        });
    }
    match kind {
        DiversityKind::FlSum => greedy_fl_sum(m, budget, cache),
        DiversityKind::FlMax => greedy_fl_max(m, budget, cache),
        DiversityKind::Pws | DiversityKind::Disf => greedy_additive(m, kind, budget),
        DiversityKind::None => Err(Error::invalid("greedy needs a diversity metric")),
    }
}

fn greedy_fl_sum(
    m: &EmbeddingMatrix,
    budget: usize,
    cache: Option<&KernelCache>,
) -> Result<GreedyResult> {
    let owned;
    let sums = match cache.and_then(|c| c.column_sums()) {
        Some(s) => s,
        None => {
            owned = KernelCache::streaming(m)?;
            owned
                .column_sums()
                .expect("streaming cache has column sums")
        }
    };
    let n = m.n();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    idx.truncate(budget);
    let mut total = 0.0;
    let trajectory = idx
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            total += sums[j];
            total / (2.0 * n as f64 * (k + 1) as f64)
        })
        .collect();
    Ok(GreedyResult {
        order: idx,
        trajectory,
    })
}

/// Smallest score, ties to the lowest index, skipping taken rows.
fn argmin_untaken(score: impl Fn(usize) -> f64 + Sync, taken: &[bool]) -> usize {
    (0..taken.len())
        .into_par_iter()
        .filter(|&j| !taken[j])
        .map(|j| (score(j), j))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("budget below candidate count")
        .1
}

fn greedy_additive(
    m: &EmbeddingMatrix,
    kind: DiversityKind,
    budget: usize,
) -> Result<GreedyResult> {
    let n = m.n();
    let norms_sq: Vec<f64> = (0..n).map(|j| m.dot(j, j)).collect();
    let mut state = GreedyState {
        chosen: Vec::with_capacity(budget),
        taken: vec![false; n],
        acc: match kind {
            DiversityKind::Pws => Accumulators::Pws {
                sim: vec![0.0; n],
                mass: 0.0,
            },
            _ => Accumulators::Disf {
                cap: vec![0.0; n],
                frob: 0.0,
            },
        },
    };
    let mut trajectory = Vec::with_capacity(budget);
    for _ in 0..budget {
        let pick = match &state.acc {
            Accumulators::Pws { sim, .. } => {
                argmin_untaken(|j| 2.0 * sim[j] + norms_sq[j], &state.taken)
            }
            Accumulators::Disf { cap, .. } => {
                argmin_untaken(|j| 2.0 * cap[j] + norms_sq[j] * norms_sq[j], &state.taken)
            }
        };
        let z = m.row(pick);
        match &mut state.acc {
            Accumulators::Pws { sim, mass } => {
                *mass += 2.0 * sim[pick] + norms_sq[pick];
                sim.par_iter_mut()
                    .enumerate()
                    .for_each(|(j, s)| *s += dot(z, m.row(j)));
            }
            Accumulators::Disf { cap, frob } => {
                *frob += 2.0 * cap[pick] + norms_sq[pick] * norms_sq[pick];
                cap.par_iter_mut()
                    .enumerate()
                    .for_each(|(j, c)| *c += dot(z, m.row(j)).powi(2));
            }
        }
        state.taken[pick] = true;
        state.chosen.push(pick);
        trajectory.push(state.value(n));
    }
    Ok(GreedyResult {
        order: state.chosen,
        trajectory,
    })
}

/// Heap entry: larger gain first, then lower index.
#[derive(Debug, PartialEq)]
struct Gain {
    gain: f64,
    index: usize,
    stamp: usize,
}

impl Eq for Gain {}

impl Ord for Gain {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then(Reverse(self.index).cmp(&Reverse(other.index)))
    }
}

impl PartialOrd for Gain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn greedy_fl_max(
    m: &EmbeddingMatrix,
    budget: usize,
    cache: Option<&KernelCache>,
) -> Result<GreedyResult> {
    let n = m.n();
    let gram = cache.and_then(|c| c.gram()).filter(|g| g.len() == n * n);
    let kernel = |i: usize, j: usize| match gram {
        Some(g) => g[i * n + j],
        None => m.dot(i, j),
    };
    let mut cover = vec![-1.0f64; n];
    let gain_of = |j: usize, cover: &[f64]| -> f64 {
        cover
            .par_iter()
            .enumerate()
            .map(|(i, &c)| (kernel(i, j) - c).max(0.0))
            .sum()
    };
    let mut heap: BinaryHeap<Gain> = (0..n)
        .map(|j| Gain {
            gain: gain_of(j, &cover),
            index: j,
            stamp: 0,
        })
        .collect();
    let mut order = Vec::with_capacity(budget);
    let mut trajectory = Vec::with_capacity(budget);
    while order.len() < budget {
        let top = heap.pop().expect("candidates remain");
        if top.stamp == order.len() {
            let j = top.index;
            for (i, c) in cover.iter_mut().enumerate() {
                *c = c.max(kernel(i, j));
            }
            order.push(j);
            trajectory.push(cover.iter().sum::<f64>() / n as f64);
        } else {
            heap.push(Gain {
                gain: gain_of(top.index, &cover),
                index: top.index,
                stamp: order.len(),
            });
        }
    }
    Ok(GreedyResult { order, trajectory })
}

/// Greedy trajectory log: `step,index,value`.
pub fn greedy_csv(r: &GreedyResult) -> String {
    let mut out = String::from("step,index,value\n");
    for (k, (&j, &v)) in r.order.iter().zip(&r.trajectory).enumerate() {
        let _ = writeln!(out, "{},{},{}", k + 1, j, sig17(v));
    }
    out
}

pub fn write_greedy_trajectory(r: &GreedyResult, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &greedy_csv(r))
}

/// The `budget` highest composites, ties to the lower index, ascending.
pub fn topk_quality(composite: &[f64], budget: usize) -> Result<Vec<usize>> {
    if budget > composite.len() {
        return Err(Error::BudgetTooLarge {
            budget,
            available: composite.len(),
        });
    }
    let mut idx: Vec<usize> = (0..composite.len()).collect();
    idx.sort_by(|&a, &b| composite[b].total_cmp(&composite[a]).then(a.cmp(&b)));
    idx.truncate(budget);
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemdedupConfig {
    pub clusters: usize,
    pub threshold: f64,
    pub target: Option<usize>,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl SemdedupConfig {
    /// `n / 100` clusters (at least one) and threshold 0.95.
    pub fn new(n: usize, seed: u64) -> Self {
        SemdedupConfig {
            clusters: (n / 100).max(1),
            threshold: 0.95,
            target: None,
            kmeans_iters: 50,
            seed,
        }
    }
}

/// Near-duplicate removal within k-means clusters.
///
/// Each cluster is scanned in ascending row order and a row is kept unless
/// its cosine to an already kept row of the same cluster exceeds the
/// threshold. With a target, only the `target` survivors with the lowest
/// maximum similarity to other kept rows of their cluster remain.
pub fn semdedup_filter(m: &EmbeddingMatrix, cfg: &SemdedupConfig) -> Result<Vec<usize>> {
    m.require_normalized()?;
    if !(cfg.threshold > -1.0 && cfg.threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (-1, 1], got {}",
            cfg.threshold
        )));
    }
    if cfg.clusters < 1 {
        return Err(Error::invalid("semdedup needs at least one cluster"));
    }
    let model = kmeans(m, cfg.clusters, cfg.kmeans_iters, cfg.seed)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); model.k];
    for (i, &c) in model.assignment.iter().enumerate() {
        members[c].push(i);
    }
    let per_cluster: Vec<Vec<(usize, f64)>> = members
        .par_iter()
        .map(|rows| {
            let mut kept: Vec<usize> = Vec::new();
            for &i in rows {
                if kept.iter().all(|&j| m.dot(i, j) <= cfg.threshold) {
                    kept.push(i);
                }
            }
            kept.iter()
                .map(|&i| {
                    let worst = kept
                        .iter()
                        .filter(|&&j| j != i)
                        .map(|&j| m.dot(i, j))
                        .fold(f64::NEG_INFINITY, f64::max);
                    (i, worst)
                })
                .collect()
        })
        .collect();
    let mut survivors: Vec<(usize, f64)> = per_cluster.into_iter().flatten().collect();
    if let Some(target) = cfg.target {
        if survivors.len() > target {
            survivors.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            survivors.truncate(target);
        }
    }
    let mut out: Vec<usize> = survivors.into_iter().map(|(i, _)| i).collect();
    out.sort_unstable();
    Ok(out)
}

/// From-scratch DiSF of `u` with the greedy normalization (`n − 1`).
pub fn greedy_disf_value(m: &EmbeddingMatrix, u: &[usize]) -> Result<f64> {
    check_subset(u, m.n())?;
    disf_metric(u, m, m.n().max(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{
        fl_max_metric, fl_sum_metric, pws_metric, EvaluatorOptions, Objective, QualityKind,
    };
    use crate::synth::{clustered_embeddings, random_unit_embeddings, uniform_composites};
    use proptest::prelude::*;

    fn quality_ev(q: &[f64]) -> ObjectiveEvaluator<'_> {
        ObjectiveEvaluator::new(
            Objective::quality_only().raw(),
            Some(q),
            None,
            EvaluatorOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(100, 10), 17_310_309_456_440);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(5000, 2500), u128::MAX);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn exhaustive_examples() {
        let q = [3.0, 1.0, 4.0, 1.0];
        assert_eq!(
            exhaustive_optimum(&quality_ev(&q), 4).unwrap().0,
            vec![0, 1, 2, 3]
        );
        let q = [1.0, 5.0, 2.0];
        let (u, v) = exhaustive_optimum(&quality_ev(&q), 1).unwrap();
        assert_eq!((u, v), (vec![1], 5.0));
        // Ties resolve to the lexicographically first subset.
        let q = [2.0, 2.0, 2.0];
        assert_eq!(
            exhaustive_optimum(&quality_ev(&q), 2).unwrap().0,
            vec![0, 1]
        );
    }

    #[test]
    fn exhaustive_cap() {
        let q = uniform_composites(100, 0);
        assert!(matches!(
            exhaustive_optimum(&quality_ev(&q), 10),
            Err(Error::CombinatorialCap { n: 100, k: 10, .. })
        ));
    }

    #[test]
    fn fl_sum_greedy_is_top_column_sums() {
        let m = random_unit_embeddings(80, 6, 3);
        let cache = KernelCache::streaming(&m).unwrap();
        let r = greedy_select(&m, DiversityKind::FlSum, 12).unwrap();
        let expected = topk_quality(cache.column_sums().unwrap(), 12).unwrap();
        assert_eq!(r.selected(), expected);
        let direct = fl_sum_metric(&r.selected(), &cache).unwrap();
        assert!((r.value() - direct).abs() < 1e-12);
    }

    #[test]
    fn disf_first_pick_is_lowest_index() {
        let rows: Vec<Vec<f32>> = (0..5)
            .map(|i| {
                (0..5)
                    .map(|j| if (i + 2) % 5 == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let m = EmbeddingMatrix::from_rows(&rows).unwrap();
        let m = crate::corpus::normalize_rows(m).unwrap();
        assert_eq!(
            greedy_select(&m, DiversityKind::Disf, 1).unwrap().order,
            vec![0]
        );
        assert_eq!(
            greedy_select(&m, DiversityKind::Pws, 3).unwrap().order,
            vec![0, 1, 2]
        );
    }

    // Every prefix of a greedy run re-evaluated from scratch.
    fn audit(m: &EmbeddingMatrix, kind: DiversityKind, budget: usize) {
        let cache = KernelCache::build(m, 1000).unwrap();
        let r = greedy_with(m, kind, budget, Some(&cache)).unwrap();
        for k in 1..=budget {
            let u = &r.order[..k];
            let fresh = match kind {
                DiversityKind::Pws => pws_metric(u, m, &cache).unwrap(),
                DiversityKind::FlMax => fl_max_metric(u, &cache).unwrap(),
                DiversityKind::Disf => greedy_disf_value(m, u).unwrap(),
                _ => fl_sum_metric(u, &cache).unwrap(),
            };
            let got = r.trajectory[k - 1];
            assert!(
                (got - fresh).abs() <= 1e-9 * fresh.abs().max(1e-12),
                "{kind} step {k}: {got} vs {fresh}"
            );
        }
    }

    #[test]
    fn accumulators_match_recomputation() {
        for (seed, kind) in [
            DiversityKind::Pws,
            DiversityKind::FlMax,
            DiversityKind::Disf,
            DiversityKind::FlSum,
        ]
        .into_iter()
        .enumerate()
        {
            audit(&random_unit_embeddings(256, 8, seed as u64), kind, 40);
            audit(&clustered_embeddings(120, 5, 4, 0.3, seed as u64), kind, 30);
        }
    }

    // Brute-force greedy: at each step evaluate every extension from scratch.
    fn naive_greedy(m: &EmbeddingMatrix, kind: DiversityKind, budget: usize) -> Vec<usize> {
        let cache = KernelCache::build(m, 1000).unwrap();
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..budget {
            let mut best: Option<(f64, usize)> = None;
            for j in (0..m.n()).filter(|j| !chosen.contains(j)) {
                let mut u = chosen.clone();
                u.push(j);
                let v = match kind {
                    DiversityKind::Pws => pws_metric(&u, m, &cache).unwrap(),
                    DiversityKind::FlMax => fl_max_metric(&u, &cache).unwrap(),
                    _ => greedy_disf_value(m, &u).unwrap(),
                };
                if best.is_none_or(|(b, _)| v > b + 1e-12) {
                    best = Some((v, j));
                }
            }
            chosen.push(best.unwrap().1);
        }
        chosen
    }

    #[test]
    fn greedy_matches_brute_force_greedy() {
        for seed in 0..5 {
            let m = random_unit_embeddings(30, 4, 50 + seed);
            for kind in [
                DiversityKind::Pws,
                DiversityKind::FlMax,
                DiversityKind::Disf,
            ] {
                let fast = greedy_select(&m, kind, 6).unwrap().order;
                assert_eq!(fast, naive_greedy(&m, kind, 6), "{kind} seed {seed}");
            }
        }
    }

    #[test]
    fn fl_max_greedy_bound_on_small_instances() {
        let bound = 1.0 - (-1.0f64).exp();
        for seed in 0..40u64 {
            let n = 6 + (seed % 7) as usize;
            let m = random_unit_embeddings(n, 3, 700 + seed);
            let ev = ObjectiveEvaluator::new(
                Objective::diversity_only(DiversityKind::FlMax).raw(),
                None,
                Some(&m),
                EvaluatorOptions::default(),
            )
            .unwrap();
            for s in 1..=4.min(n) {
                let (_, opt) = exhaustive_optimum(&ev, s).unwrap();
                let g = greedy_select(&m, DiversityKind::FlMax, s).unwrap().value();
                assert!(g + 1.0 >= bound * (opt + 1.0) - 1e-12, "n={n} s={s}");
            }
        }
    }

    #[test]
    fn lazy_and_streaming_agree() {
        let m = random_unit_embeddings(90, 5, 9);
        let cache = KernelCache::build(&m, 1000).unwrap();
        let a = greedy_with(&m, DiversityKind::FlMax, 15, Some(&cache)).unwrap();
        let b = greedy_with(&m, DiversityKind::FlMax, 15, None).unwrap();
        assert_eq!(a.order, b.order);
    }

    #[test]
    fn greedy_csv_rows() {
        let m = random_unit_embeddings(20, 3, 1);
        let r = greedy_select(&m, DiversityKind::Disf, 5).unwrap();
        let csv = greedy_csv(&r);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("step,index,value\n1,"));
    }

    #[test]
    fn topk_examples() {
        assert_eq!(topk_quality(&[1.0, 5.0, 2.0], 2).unwrap(), vec![1, 2]);
        assert_eq!(topk_quality(&[1.0, 5.0, 2.0], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(topk_quality(&[2.0, 2.0, 2.0, 3.0], 2).unwrap(), vec![0, 3]);
        assert!(topk_quality(&[1.0], 2).is_err());
    }

    #[test]
    fn topk_matches_full_sort() {
        let q = uniform_composites(10_000, 4);
        let mut sorted: Vec<(f64, usize)> = q.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut expected: Vec<usize> = sorted[..1234].iter().map(|x| x.1).collect();
        expected.sort_unstable();
        assert_eq!(topk_quality(&q, 1234).unwrap(), expected);
    }

    fn semdedup(
        m: &EmbeddingMatrix,
        k: usize,
        threshold: f64,
        target: Option<usize>,
    ) -> Vec<usize> {
        let cfg = SemdedupConfig {
            clusters: k,
            threshold,
            target,
            kmeans_iters: 30,
            seed: 5,
        };
        semdedup_filter(m, &cfg).unwrap()
    }

    #[test]
    fn semdedup_examples() {
        let twins = EmbeddingMatrix::from_rows(&[vec![0.6f32, 0.8], vec![0.6, 0.8]]).unwrap();
        let twins = crate::corpus::normalize_rows(twins).unwrap();
        assert_eq!(semdedup(&twins, 1, 0.99, None), vec![0]);

        let basis: Vec<Vec<f32>> = (0..6)
            .map(|i| (0..6).map(|j| (i == j) as u8 as f32).collect())
            .collect();
        let basis =
            crate::corpus::normalize_rows(EmbeddingMatrix::from_rows(&basis).unwrap()).unwrap();
        assert_eq!(semdedup(&basis, 2, 0.0, None), (0..6).collect::<Vec<_>>());
        assert_eq!(semdedup(&basis, 2, 0.0, Some(4)), vec![0, 1, 2, 3]);
        assert!(semdedup_filter(
            &basis,
            &SemdedupConfig {
                threshold: -1.0,
                ..SemdedupConfig::new(6, 0)
            }
        )
        .is_err());
    }

    #[test]
    fn semdedup_pair_scan() {
        let m = clustered_embeddings(500, 6, 20, 0.15, 8);
        let cfg = SemdedupConfig {
            clusters: 10,
            threshold: 0.9,
            target: None,
            kmeans_iters: 30,
            seed: 2,
        };
        let kept = semdedup_filter(&m, &cfg).unwrap();
        assert!(kept.len() < 500 && !kept.is_empty());
        let model = kmeans(&m, 10, 30, 2).unwrap();
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                if model.assignment[i] == model.assignment[j] {
                    assert!(m.dot(i, j) <= 0.9, "{i},{j}");
                }
            }
        }
        // Every dropped row has a kept, earlier, too-similar cluster mate.
        for i in (0..500).filter(|i| !kept.contains(i)) {
            assert!(kept.iter().any(|&j| j < i
                && model.assignment[i] == model.assignment[j]
                && m.dot(i, j) > 0.9));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn fl_max_trajectory_is_monotone(seed in 0u64..1000, n in 5usize..40) {
            let m = random_unit_embeddings(n, 4, seed);
            let r = greedy_select(&m, DiversityKind::FlMax, n.min(8)).unwrap();
            prop_assert!(r.trajectory.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
    }

    #[test]
    fn quality_objective_in_exhaustive() {
        let q = uniform_composites(10, 2);
        let obj = Objective::new(1.0, DiversityKind::None, QualityKind::Composite).unwrap();
        let ev = ObjectiveEvaluator::new(obj, Some(&q), None, EvaluatorOptions::default()).unwrap();
        let (u, _) = exhaustive_optimum(&ev, 3).unwrap();
        assert_eq!(u, topk_quality(&q, 3).unwrap());
    }
}
