//! Clustering, per-cluster heatmaps, length statistics and estimator
//! variance probes.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{write_text, EmbeddingMatrix, QualityTable};
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::masklearn::{
    group_advantages, group_stats, order_gradient, sample_order_probs, softmax_probs, stream_rng,
    variance_reduction_probability, Logits, StreamRng,
};
use crate::metrics::{
    quality_metric, DiversityKind, EvaluatorOptions, Objective, ObjectiveEvaluator,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub d: usize,
    /// `k × d`, row-major.
    pub centers: Vec<f64>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
}

impl ClusterModel {
    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.d..(c + 1) * self.d]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

fn sq_dist(x: &[f32], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(&a, &b)| (a as f64 - b).powi(2)).sum()
}

/// Nearest center and its squared distance, ties to the lower center.
fn nearest(x: &[f32], centers: &[f64], d: usize) -> (usize, f64) {
    centers
        .chunks_exact(d)
        .enumerate()
        .map(|(c, center)| (c, sq_dist(x, center)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

/// Lloyd's k-means with k-means++ seeding.
///
/// Stops once no center moves more than `1e-6` or after `iters` rounds. A
/// cluster left empty takes the point farthest from its own center.
pub fn kmeans(m: &EmbeddingMatrix, k: usize, iters: usize, seed: u64) -> Result<ClusterModel> {
    let (n, d) = (m.n(), m.d());
    if k < 1 || k > n {
        return Err(Error::invalid(format!("k must lie in [1, {n}], got {k}")));
    }
    if iters < 1 {
        return Err(Error::invalid("k-means needs at least one iteration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = |i: usize| m.row(i).iter().map(|&x| x as f64);

    // k-means++ seeding.
    let mut centers: Vec<f64> = Vec::with_capacity(k * d);
    centers.extend(row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(m.row(i), &centers[..d])).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.extend(row(pick));
        let new = &centers[c * d..];
        dist.par_iter_mut()
            .enumerate()
            .for_each(|(i, w)| *w = w.min(sq_dist(m.row(i), new)));
    }

    let mut assignment = vec![0usize; n];
    let mut history = Vec::new();
    for _ in 0..iters {
        let nearest_all: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest(m.row(i), &centers, d))
            .collect();
        for (a, &(c, _)) in assignment.iter_mut().zip(&nearest_all) {
            *a = c;
        }
        history.push(nearest_all.iter().map(|x| x.1).sum());

        let mut sums = vec![0.0f64; k * d];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        let mut used = vec![false; n];
        let mut moved = 0.0f64;
        for c in 0..k {
            let new: Vec<f64> = if counts[c] > 0 {
                sums[c * d..(c + 1) * d]
                    .iter()
                    .map(|s| s / counts[c] as f64)
                    .collect()
            } else {
                let far = (0..n)
                    .filter(|&i| !used[i])
                    .max_by(|&a, &b| {
                        nearest_all[a]
                            .1
                            .total_cmp(&nearest_all[b].1)
                            .then(b.cmp(&a))
                    })
                    .expect("k <= n leaves a point");
                used[far] = true;
                row(far).collect()
            };
            let shift = new
                .iter()
                .zip(&centers[c * d..(c + 1) * d])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            moved = moved.max(shift);
            centers[c * d..(c + 1) * d].copy_from_slice(&new);
        }
        if moved < 1e-6 {
            break;
        }
    }
    // Final assignment against the final centers.
    let nearest_all: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| nearest(m.row(i), &centers, d))
        .collect();
    for (a, &(c, _)) in assignment.iter_mut().zip(&nearest_all) {
        *a = c;
    }
    let inertia = nearest_all.iter().map(|x| x.1).sum();
    history.push(inertia);
    Ok(ClusterModel {
        k,
        d,
        centers,
        assignment,
        inertia,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub cluster_id: usize,
    pub size: usize,
    pub mean_quality: Option<f64>,
    pub diversity: Option<f64>,
}

/// Per cluster: size, mean composite quality and the raw diversity metric
/// of the cluster's members.
pub fn cluster_heatmap(
    model: &ClusterModel,
    q: &QualityTable,
    m: &EmbeddingMatrix,
    kind: DiversityKind,
) -> Result<Vec<HeatmapRow>> {
    if model.assignment.len() != q.len() || q.len() != m.n() {
        return Err(Error::invalid(format!(
            "cluster model covers {} samples, quality {} and embeddings {}",
            model.assignment.len(),
            q.len(),
            m.n()
        )));
    }
    let ev = ObjectiveEvaluator::new(
        Objective::diversity_only(kind).raw(),
        None,
        Some(m),
        EvaluatorOptions::default(),
    )?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); model.k];
    for (i, &c) in model.assignment.iter().enumerate() {
        members[c].push(i);
    }
    members
        .iter()
        .enumerate()
        .map(|(c, u)| {
            if u.is_empty() {
                return Ok(HeatmapRow {
                    cluster_id: c,
                    size: 0,
                    mean_quality: None,
                    diversity: None,
                });
            }
            Ok(HeatmapRow {
                cluster_id: c,
                size: u.len(),
                mean_quality: Some(quality_metric(u, q.composite())?),
                diversity: Some(ev.raw_diversity(u)?),
            })
        })
        .collect()
}

fn opt_field(v: Option<f64>) -> String {
    v.map(sig17).unwrap_or_default()
}

/// `cluster_id,size,mean_quality,diversity`; empty clusters leave the
/// metric fields blank.
pub fn heatmap_csv(rows: &[HeatmapRow]) -> String {
    let mut out = String::from("cluster_id,size,mean_quality,diversity\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.cluster_id,
            r.size,
            opt_field(r.mean_quality),
            opt_field(r.diversity)
        );
    }
    out
}

pub fn write_heatmap(rows: &[HeatmapRow], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &heatmap_csv(rows))
}

/// Linear-interpolation quantile of ascending `sorted` at `p ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// 10th through 90th percentiles.
    pub deciles: [f64; 9],
}

impl LengthSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let deciles = std::array::from_fn(|i| quantile(&sorted, (i + 1) as f64 / 10.0));
        Ok(LengthSummary {
            count: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: quantile(&sorted, 0.5),
            deciles,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStats {
    pub selected: LengthSummary,
    pub corpus: LengthSummary,
}

pub fn selection_stats(selected: &[usize], lengths: &[f64]) -> Result<SelectionStats> {
    if let Some(&index) = selected.iter().find(|&&i| i >= lengths.len()) {
        return Err(Error::IndexOutOfRange {
            index,
            len: lengths.len(),
        });
    }
    let chosen: Vec<f64> = selected.iter().map(|&i| lengths[i]).collect();
    Ok(SelectionStats {
        selected: LengthSummary::of(&chosen)?,
        corpus: LengthSummary::of(lengths)?,
    })
}

/// `statistic,selected,corpus` with rows count, mean, median, p10..p90.
pub fn stats_csv(s: &SelectionStats) -> String {
    let mut out = String::from("statistic,selected,corpus\n");
    let _ = writeln!(out, "count,{},{}", s.selected.count, s.corpus.count);
    let _ = writeln!(
        out,
        "mean,{},{}",
        sig17(s.selected.mean),
        sig17(s.corpus.mean)
    );
    let _ = writeln!(
        out,
        "median,{},{}",
        sig17(s.selected.median),
        sig17(s.corpus.median)
    );
    for (i, (a, b)) in s.selected.deciles.iter().zip(&s.corpus.deciles).enumerate() {
        let _ = writeln!(out, "p{},{},{}", (i + 1) * 10, sig17(*a), sig17(*b));
    }
    out
}

pub fn write_stats(s: &SelectionStats, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &stats_csv(s))
}

/// Reads `index,length` rows; indices must run 0, 1, 2, ...
pub fn load_lengths(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ic), Some(lc)) = (col("index"), col("length")) else {
        return Err(parse_err(1, "expected columns index,length".into()));
    };
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |c: usize| {
            rec.get(c)
                .ok_or_else(|| parse_err(line, "missing field".into()))
        };
        let index: usize = field(ic)?
            .parse()
            .map_err(|e| parse_err(line, format!("bad index: {e}")))?;
        if index != k {
            return Err(parse_err(
                line,
                format!("expected index {k}, found {index}"),
            ));
        }
        let len: f64 = field(lc)?
            .parse()
            .map_err(|e| parse_err(line, format!("bad length: {e}")))?;
        if !len.is_finite() || len < 0.0 {
            return Err(parse_err(
                line,
                format!("length must be finite and >= 0, got {len}"),
            ));
        }
        out.push(len);
    }
    Ok(out)
}

pub fn write_lengths(lengths: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("index,length\n");
    for (i, l) in lengths.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", sig17(*l));
    }
    write_text(path.as_ref(), &out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorVariance {
    /// `vanilla` (one sample, `f·∇ln P`), `vanilla_mean` (average of `G`
    /// such terms) or `group` (group-relative advantages).
    pub estimator: &'static str,
    /// Samples per estimate.
    pub g: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub rows: Vec<EstimatorVariance>,
    /// Mean and population standard deviation of all rewards drawn.
    pub reward_mean: f64,
    pub reward_std: f64,
    /// `(G, Φ(μ√G / (2σ)))` for each group size.
    pub phi: Vec<(usize, f64)>,
}

impl VarianceReport {
    pub fn find(&self, estimator: &str, g: usize) -> Option<&EstimatorVariance> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.g == g)
    }

    /// Fraction of coordinates where `a` has strictly lower variance than `b`.
    pub fn lower_fraction(a: &EstimatorVariance, b: &EstimatorVariance) -> f64 {
        let wins = a
            .variance
            .iter()
            .zip(&b.variance)
            .filter(|(x, y)| x < y)
            .count();
        wins as f64 / a.variance.len() as f64
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Cosine between the mean gradients of two estimators.
pub fn mean_direction_cosine(a: &EstimatorVariance, b: &EstimatorVariance) -> f64 {
    cosine(&a.mean, &b.mean)
}

/// Repeats each gradient estimator `repetitions` times at fixed logits and
/// reports per-coordinate mean and variance.
///
/// Repetition `r` draws its masks from [`stream_rng`]`(seed, r, ·)`, so
/// results do not depend on the thread count.
pub fn estimator_variance_probe(
    ev: &ObjectiveEvaluator<'_>,
    logits: &Logits,
    budget: usize,
    group_sizes: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if repetitions < 100 {
        return Err(Error::invalid(format!(
            "variance probe needs at least 100 repetitions, got {repetitions}"
        )));
    }
    if group_sizes.is_empty() || group_sizes.iter().any(|&g| g < 2) {
        return Err(Error::invalid("group sizes must all be at least 2"));
    }
    let n = logits.len();
    let p = softmax_probs(logits.values());
    let map = logits.candidate_map();
    let draw = |rng: &mut StreamRng| -> Result<(f64, Vec<f64>)> {
        let order = sample_order_probs(&p, budget, rng)?;
        let rows: Vec<usize> = order.iter().map(|&i| map[i]).collect();
        let f = ev.evaluate(&rows)?;
        Ok((f, order_gradient(&p, &order)?.to_dense(&p)))
    };

    // One repetition: (rewards seen, vanilla, per-G vanilla mean, per-G group).
    type Rep = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);
    let reps: Vec<Rep> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rewards = Vec::new();
            let mut rng = stream_rng(seed, r as u64, 0);
            let (f, g) = draw(&mut rng)?;
            rewards.push(f);
            let vanilla: Vec<f64> = g.iter().map(|x| f * x).collect();
            let mut plain = Vec::with_capacity(group_sizes.len());
            let mut group = Vec::with_capacity(group_sizes.len());
            for (k, &gs) in group_sizes.iter().enumerate() {
                let mut rng = stream_rng(seed, r as u64, k as u64 + 1);
                let samples: Vec<(f64, Vec<f64>)> =
                    (0..gs).map(|_| draw(&mut rng)).collect::<Result<_>>()?;
                let fs: Vec<f64> = samples.iter().map(|s| s.0).collect();
                let adv = group_advantages(&fs, 1e-8);
                let mut a = vec![0.0; n];
                let mut b = vec![0.0; n];
                for ((f, g), w) in samples.iter().zip(&adv) {
                    for i in 0..n {
                        a[i] += f * g[i] / gs as f64;
                        b[i] += w * g[i] / gs as f64;
                    }
                }
                rewards.extend(fs);
                plain.push(a);
                group.push(b);
            }
            Ok((rewards, vanilla, plain, group))
        })
        .collect::<Result<_>>()?;

    let moments = |pick: &dyn Fn(&Rep) -> &Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        let t = repetitions as f64;
        let mut mean = vec![0.0; n];
        for r in &reps {
            for (m, x) in mean.iter_mut().zip(pick(r)) {
                *m += x / t;
            }
        }
        let mut var = vec![0.0; n];
        for r in &reps {
            for ((v, x), m) in var.iter_mut().zip(pick(r)).zip(&mean) {
                *v += (x - m).powi(2) / (t - 1.0);
            }
        }
        (mean, var)
    };

    let mut rows = Vec::new();
    let (mean, variance) = moments(&|r: &Rep| &r.1);
    rows.push(EstimatorVariance {
        estimator: "vanilla",
        g: 1,
        mean,
        variance,
    });
    for (k, &gs) in group_sizes.iter().enumerate() {
        let (mean, variance) = moments(&|r: &Rep| &r.2[k]);
        rows.push(EstimatorVariance {
            estimator: "vanilla_mean",
            g: gs,
            mean,
            variance,
        });
        let (mean, variance) = moments(&|r: &Rep| &r.3[k]);
        rows.push(EstimatorVariance {
            estimator: "group",
            g: gs,
            mean,
            variance,
        });
    }
    let all: Vec<f64> = reps.iter().flat_map(|r| r.0.iter().copied()).collect();
    let (reward_mean, reward_std) = group_stats(&all);
    let phi = group_sizes
        .iter()
        .map(|&g| {
            let v = if reward_std > 0.0 {
                variance_reduction_probability(reward_mean, reward_std, g)?
            } else {
                f64::NAN
            };
            Ok((g, v))
        })
        .collect::<Result<_>>()?;
    Ok(VarianceReport {
        rows,
        reward_mean,
        reward_std,
        phi,
    })
}

/// `estimator,G,coordinate,variance`.
pub fn variance_csv(report: &VarianceReport) -> String {
    let mut out = String::from("estimator,G,coordinate,variance\n");
    for r in &report.rows {
        for (i, v) in r.variance.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", r.estimator, r.g, i, sig17(*v));
        }
    }
    out
}

pub fn write_variance(report: &VarianceReport, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &variance_csv(report))
}
