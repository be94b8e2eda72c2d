//! Mask learning: a softmax policy over candidates, trained with
//! group-relative policy gradients, then read off as the top-`S` logits.

mod checkpoint;
mod policy;
mod probe;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use policy::{
    grad_order_log_prob, group_advantages, group_relative_gradient, group_stats, log_sum_exp,
    order_gradient, order_log_prob, sample_mask, sample_order, sample_order_probs, softmax_probs,
    MaskSample, OrderGradient, MIN_TAIL_MASS,
};
pub use probe::{
    reward_gradient_probe, score_function_probe, variance_reduction_probability, ProbeResult,
};

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::corpus::{write_text, QualityTable, COMPOSITE_MAX};
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::metrics::ObjectiveEvaluator;
use policy::combine_gradients;

/// Sampling logits over the active candidates.
///
/// `candidate_map[p]` is the row (in whatever data the caller scores
/// against) that position `p` stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    values: Vec<f64>,
    candidate_map: Vec<usize>,
}

impl Logits {
    pub fn new(values: Vec<f64>, candidate_map: Vec<usize>) -> Result<Self> {
        if values.len() != candidate_map.len() {
            return Err(Error::invalid(format!(
                "{} logits for {} candidates",
                values.len(),
                candidate_map.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogit { index });
        }
        Ok(Logits {
            values,
            candidate_map,
        })
    }

    /// All-zero logits over `candidate_map`.
    pub fn uniform(candidate_map: Vec<usize>) -> Self {
        Logits {
            values: vec![0.0; candidate_map.len()],
            candidate_map,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn candidate_map(&self) -> &[usize] {
        &self.candidate_map
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        softmax_probs(&self.values)
    }

    /// Positions of the `k` largest logits, ties to the smaller mapped index.
    pub fn top_positions(&self, k: usize) -> Vec<usize> {
        let desc = |a: &usize, b: &usize| {
            self.values[*b]
                .total_cmp(&self.values[*a])
                .then(self.candidate_map[*a].cmp(&self.candidate_map[*b]))
        };
        let mut idx: Vec<usize> = (0..self.len()).collect();
        if k > 0 && k < idx.len() {
            idx.select_nth_unstable_by(k - 1, desc);
        }
        idx.truncate(k);
        idx.sort_unstable_by(desc);
        idx
    }

    /// Mapped rows of the `k` largest logits, ascending.
    pub fn top_rows(&self, k: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .top_positions(k)
            .into_iter()
            .map(|p| self.candidate_map[p])
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Applies `L += η·grad` on `positions` (all positions when `None`), then
/// shifts every logit by the change in the mean.
///
/// Since a score-function gradient sums to zero, the shift only removes
/// rounding drift: zero-mean logits stay zero-mean, and a zero gradient leaves
/// the logits bit-for-bit unchanged.
fn apply_update(
    values: &mut [f64],
    positions: Option<&[usize]>,
    grad: &[f64],
    lr: f64,
) -> Result<()> {
    let n = values.len() as f64;
    let before = values.iter().sum::<f64>() / n;
    match positions {
        Some(pos) => {
            for (&p, &g) in pos.iter().zip(grad) {
                values[p] += lr * g;
            }
        }
        None => {
            for (v, &g) in values.iter_mut().zip(grad) {
                *v += lr * g;
            }
        }
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogit { index });
    }
    let drift = values.iter().sum::<f64>() / n - before;
    if drift != 0.0 {
        for v in values.iter_mut() {
            *v -= drift;
        }
    }
    Ok(())
}

/// One gradient-ascent step; see [`apply_update`] for the re-centering.
pub fn update_logits(l: &Logits, grad: &[f64], lr: f64) -> Result<Logits> {
    if grad.len() != l.len() {
        return Err(Error::invalid(format!(
            "gradient has {} entries for {} logits",
            grad.len(),
            l.len()
        )));
    }
    let mut out = l.clone();
    apply_update(&mut out.values, None, grad, lr)?;
    Ok(out)
}

/// Logits linear in composite quality: 0 maps to `l_min`, 15 to `l_max`.
/// `active` lists the table rows that become candidates.
pub fn quality_init(q: &QualityTable, active: &[usize], l_min: f64, l_max: f64) -> Result<Logits> {
    if !(l_min < l_max) || !l_min.is_finite() || !l_max.is_finite() {
        return Err(Error::invalid(format!(
            "quality init needs l_min < l_max, got ({l_min}, {l_max})"
        )));
    }
    let composite = q.composite();
    let values = active
        .iter()
        .map(|&i| {
            composite
                .get(i)
                .map(|c| c / COMPOSITE_MAX * (l_max - l_min) + l_min)
                .ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: composite.len(),
                })
        })
        .collect::<Result<_>>()?;
    Logits::new(values, active.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Uniform,
    QualityAware { l_min: f64, l_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub group_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_ratio: f64,
    pub seed: u64,
    pub sigma_floor: f64,
    pub init: Init,
    /// Draw the final mask from the learned distribution instead of top-`S`.
    pub sample_final: bool,
    /// Stop once the top-`S` objective reaches this value.
    pub stop_at: Option<f64>,
    /// Epoch interval for the `stop_at` check.
    pub check_every: usize,
}

impl OptimizerConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        OptimizerConfig {
            budget,
            group_size: 128,
            learning_rate: 10.0,
            epochs: 10_000,
            batch_ratio: 1.0,
            seed,
            sigma_floor: 1e-8,
            init: Init::Uniform,
            sample_final: false,
            stop_at: None,
            check_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if self.budget < 1 {
            return fail("budget must be at least 1".into());
        }
        if self.group_size < 2 {
            return fail(format!(
                "group size must be at least 2, got {}",
                self.group_size
            ));
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.batch_ratio > 0.0 && self.batch_ratio <= 1.0) {
            return fail(format!(
                "batch ratio must lie in (0, 1], got {}",
                self.batch_ratio
            ));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return fail(format!(
                "sigma floor must be positive, got {}",
                self.sigma_floor
            ));
        }
        if let Init::QualityAware { l_min, l_max } = self.init {
            if !(l_min < l_max) {
                return fail(format!(
                    "quality init needs l_min < l_max, got ({l_min}, {l_max})"
                ));
            }
        }
        if self.check_every < 1 {
            return fail("check interval must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub best_reward: f64,
    pub grad_norm: f64,
    pub wallclock_ms: f64,
}

#[derive(Debug, Clone)]
pub struct DatamaskRun {
    /// Mapped rows of the final mask, ascending.
    pub selection: Vec<usize>,
    pub logits: Logits,
    pub trajectory: Vec<EpochStats>,
    /// Objective value of `selection`.
    pub objective: f64,
    pub epochs_run: usize,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator behind every rollout stream. Fast, since each rollout draws
/// one variate per candidate.
pub type StreamRng = Xoshiro256PlusPlus;

/// RNG for stream `stream` of epoch `epoch`, a function of nothing else.
pub fn stream_rng(seed: u64, epoch: u64, stream: u64) -> StreamRng {
    StreamRng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ epoch) ^ stream))
}

const UNIVERSE_STREAM: u64 = u64::MAX;
const FINAL_STREAM: u64 = u64::MAX - 1;

/// Candidate count and budget for one batch-updating epoch.
pub fn batch_sizes(n: usize, budget: usize, ratio: f64) -> (usize, usize) {
    if ratio >= 1.0 {
        return (n, budget);
    }
    let n_b = ((ratio * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let s_b = ((ratio * budget as f64).round() as usize).max(1).min(n_b);
    (n_b.min(n), s_b)
}

/// Runs mask learning from `initial` and scores masks with `ev`.
///
/// Each epoch draws `G` masks from a frozen snapshot of the logits (in
/// parallel; rollout `j` of epoch `t` uses [`stream_rng`]`(seed, t, j)`),
/// standardizes their rewards within the group and takes one ascent step.
/// With `batch_ratio < 1` each epoch samples and updates only a fresh random
/// universe of candidates with a proportional budget.
pub fn run_datamask(
    ev: &ObjectiveEvaluator<'_>,
    initial: Logits,
    cfg: &OptimizerConfig,
) -> Result<DatamaskRun> {
    cfg.validate()?;
    let n = initial.len();
    if cfg.budget > n {
        return Err(Error::BudgetTooLarge {
            budget: cfg.budget,
            available: n,
        });
    }
    if let Some(&index) = initial.candidate_map.iter().find(|&&r| r >= ev.n()) {
        return Err(Error::IndexOutOfRange { index, len: ev.n() });
    }
    let (n_b, s_b) = batch_sizes(n, cfg.budget, cfg.batch_ratio);
    let mut logits = initial;
    let mut trajectory = Vec::with_capacity(cfg.epochs);
    let start = Instant::now();
    let mut epochs_run = 0;
    let mut universe: Vec<usize> = (0..n).collect();
    let mut local = Vec::with_capacity(n_b);

    for epoch in 1..=cfg.epochs {
        if n_b < n {
            let mut rng = stream_rng(cfg.seed, epoch as u64, UNIVERSE_STREAM);
            universe = sample(&mut rng, n, n_b).into_vec();
            universe.sort_unstable();
        }
        local.clear();
        local.extend(universe.iter().map(|&p| logits.values[p]));
        let probs = softmax_probs(&local);

        let rollouts: Vec<(f64, OrderGradient)> = (0..cfg.group_size)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(cfg.seed, epoch as u64, j as u64);
                let order = sample_order_probs(&probs, s_b, &mut rng)?;
                let rows: Vec<usize> = order
                    .iter()
                    .map(|&b| logits.candidate_map[universe[b]])
                    .collect();
                let reward = ev.evaluate(&rows)?;
                if !reward.is_finite() {
                    return Err(Error::NonFiniteReward { epoch, rollout: j });
                }
                Ok((reward, order_gradient(&probs, &order)?))
            })
            .collect::<Result<_>>()?;

        let (rewards, grads): (Vec<f64>, Vec<OrderGradient>) = rollouts.into_iter().unzip();
        let (mean, _) = group_stats(&rewards);
        let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let adv = group_advantages(&rewards, cfg.sigma_floor);
        let grad = combine_gradients(&probs, &grads, &adv);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let positions = (n_b < n).then_some(universe.as_slice());
        apply_update(&mut logits.values, positions, &grad, cfg.learning_rate)?;

        trajectory.push(EpochStats {
            epoch,
            mean_reward: mean,
            best_reward: best,
            grad_norm,
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        epochs_run = epoch;

        if let Some(target) = cfg.stop_at {
            if epoch % cfg.check_every == 0 && ev.evaluate(&logits.top_rows(cfg.budget))? >= target
            {
                break;
            }
        }
    }

    let selection = if cfg.sample_final {
        let mut rng = stream_rng(cfg.seed, epochs_run as u64, FINAL_STREAM);
        let mut rows: Vec<usize> = sample_order(&logits.values, cfg.budget, &mut rng)?
            .into_iter()
            .map(|p| logits.candidate_map[p])
            .collect();
        rows.sort_unstable();
        rows
    } else {
        logits.top_rows(cfg.budget)
    };
    let objective = ev.evaluate(&selection)?;
    Ok(DatamaskRun {
        selection,
        logits,
        trajectory,
        objective,
        epochs_run,
    })
}

/// Trajectory log: `epoch,mean_reward,best_reward,grad_norm,wallclock_ms`.
pub fn trajectory_csv(trajectory: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_reward,best_reward,grad_norm,wallclock_ms\n");
    for s in trajectory {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            s.epoch,
            sig17(s.mean_reward),
            sig17(s.best_reward),
            sig17(s.grad_norm),
            s.wallclock_ms
        );
    }
    out
}

pub fn write_trajectory(trajectory: &[EpochStats], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &trajectory_csv(trajectory))
}

#[cfg(test)]
mod tests;
