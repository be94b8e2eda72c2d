//! Sampling distribution over ordered masks and its score function.
//!
//! A mask is `S` draws without replacement, each renormalized over what is
//! left (Plackett–Luce). For a realized order `π`,
//!
//! ```text
//! ln P(π | L) = Σ_k [ ln p_{π(k)} − ln T_k ],   T_k = 1 − Σ_{m<k} p_{π(m)}
//! ```
//!
//! and, writing `c_k = Σ_{k'≤k} 1/T_{k'}`, its gradient is
//! `1 − p_i c_m` for `i = π(m)` and `−p_i c_S` for every unselected `i`.
//! The tail masses `T_k` are summed from the remaining candidates directly,
//! never as `1 − (selected mass)`, so they stay accurate when the selection
//! holds almost all probability.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// Smallest tail mass before the order is treated as numerically impossible.
pub const MIN_TAIL_MASS: f64 = 1e-300;

/// Numerically stable softmax.
pub fn softmax_probs(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = p.iter().sum();
    for x in &mut p {
        *x /= z;
    }
    p
}

/// `ln Σ exp(L_i)`.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// One ordered without-replacement draw.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSample {
    /// Positions in draw order.
    pub order: Vec<usize>,
    /// `ln P(order | L)`.
    pub log_prob: f64,
    /// Objective value once scored.
    pub reward: Option<f64>,
}

/// Draws `budget` distinct positions in Plackett–Luce order.
///
/// Adds independent standard Gumbel noise to each logit and keeps the
/// `budget` largest keys in descending order, which has the same law as
/// sequential renormalized softmax draws.
pub fn sample_order<R: Rng + ?Sized>(
    logits: &[f64],
    budget: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    sample_order_probs(&softmax_probs(logits), budget, rng)
}

/// [`sample_order`] given the softmax probabilities instead of the logits.
///
/// `l_i − ln E_i` with `E_i ~ Exp(1)` is a Gumbel-perturbed logit, and
/// `p_i / E_i` is a monotone transform of it, so ranking by the ratio needs
/// no logarithm. Same draws as [`sample_order`] for the same RNG state.
pub fn sample_order_probs<R: Rng + ?Sized>(
    p: &[f64],
    budget: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if budget > p.len() {
        return Err(Error::BudgetTooLarge {
            budget,
            available: p.len(),
        });
    }
    if budget == 0 {
        return Ok(Vec::new());
    }
    let mut keys: Vec<(f64, usize)> = p
        .iter()
        .enumerate()
        .map(|(i, &x)| (x / rng.sample::<f64, _>(Exp1), i))
        .collect();
    // Larger key first, ties to the lower index.
    let by_key = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if budget < keys.len() {
        keys.select_nth_unstable_by(budget - 1, by_key);
        keys.truncate(budget);
    }
    keys.sort_unstable_by(by_key);
    Ok(keys.into_iter().map(|(_, i)| i).collect())
}

pub fn sample_mask<R: Rng + ?Sized>(
    logits: &[f64],
    budget: usize,
    rng: &mut R,
) -> Result<MaskSample> {
    let order = sample_order(logits, budget, rng)?;
    let log_prob = order_log_prob(logits, &order)?;
    Ok(MaskSample {
        order,
        log_prob,
        reward: None,
    })
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!(
                "position {i} repeats in draw order"
            )));
        }
    }
    Ok(())
}

/// Tail masses `T_1..T_S` for `order` under probabilities `p`.
fn tail_masses(p: &[f64], order: &[usize]) -> Result<Vec<f64>> {
    let mut selected = vec![false; p.len()];
    for &i in order {
        selected[i] = true;
    }
    let rest: f64 = p
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| !s)
        .map(|(&x, _)| x)
        .sum();
    let mut tails = vec![0.0; order.len()];
    let mut acc = rest;
    for k in (0..order.len()).rev() {
        acc += p[order[k]];
        tails[k] = acc;
    }
    if let Some(step) = tails.iter().position(|&t| t < MIN_TAIL_MASS) {
        return Err(Error::VanishingTailMass { step });
    }
    Ok(tails)
}

/// Log-probability of drawing exactly `order` (the realized permutation).
pub fn order_log_prob(logits: &[f64], order: &[usize]) -> Result<f64> {
    check_order(order, logits.len())?;
    let lse = log_sum_exp(logits);
    let p = softmax_probs(logits);
    let tails = tail_masses(&p, order)?;
    Ok(order
        .iter()
        .zip(&tails)
        .map(|(&i, &t)| (logits[i] - lse) - t.ln())
        .sum())
}

/// `∇_L ln P(order | L)` in sparse form: entry `i` equals
/// `−p_i · dense_coeff` plus the `sparse` correction at `i`, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderGradient {
    pub dense_coeff: f64,
    pub sparse: Vec<(usize, f64)>,
}

impl OrderGradient {
    pub fn to_dense(&self, p: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = p.iter().map(|&x| -x * self.dense_coeff).collect();
        for &(i, v) in &self.sparse {
            g[i] += v;
        }
        g
    }
}

/// Score function of `order` given the softmax probabilities `p`.
pub fn order_gradient(p: &[f64], order: &[usize]) -> Result<OrderGradient> {
    let tails = tail_masses(p, order)?;
    let mut c = 0.0;
    let mut prefix = Vec::with_capacity(order.len());
    for t in &tails {
        c += 1.0 / t;
        prefix.push(c);
    }
    let dense_coeff = c;
    let sparse = order
        .iter()
        .zip(&prefix)
        .map(|(&i, &cm)| (i, 1.0 - p[i] * cm + p[i] * dense_coeff))
        .collect();
    Ok(OrderGradient {
        dense_coeff,
        sparse,
    })
}

/// Dense `∇_L ln P(order | L)`.
pub fn grad_order_log_prob(logits: &[f64], order: &[usize]) -> Result<Vec<f64>> {
    check_order(order, logits.len())?;
    let p = softmax_probs(logits);
    Ok(order_gradient(&p, order)?.to_dense(&p))
}

/// Group mean and population standard deviation.
pub fn group_stats(rewards: &[f64]) -> (f64, f64) {
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g;
    (mean, var.sqrt())
}

/// `(f_j − μ_G) / max(σ_G, floor)`.
pub fn group_advantages(rewards: &[f64], sigma_floor: f64) -> Vec<f64> {
    // The computed mean of equal values can miss them by an ulp.
    if rewards.windows(2).all(|w| w[0] == w[1]) {
        return vec![0.0; rewards.len()];
    }
    let (mean, sd) = group_stats(rewards);
    let scale = sd.max(sigma_floor);
    rewards.iter().map(|r| (r - mean) / scale).collect()
}

/// Group-relative policy-gradient estimate from scored samples.
pub fn group_relative_gradient(
    samples: &[MaskSample],
    logits: &[f64],
    sigma_floor: f64,
) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid("group needs at least 2 samples"));
    }
    let rewards: Vec<f64> = samples
        .iter()
        .map(|s| {
            s.reward
                .ok_or_else(|| Error::invalid("unscored sample in group"))
        })
        .collect::<Result<_>>()?;
    let p = softmax_probs(logits);
    let grads: Vec<OrderGradient> = samples
        .iter()
        .map(|s| {
            check_order(&s.order, logits.len())?;
            order_gradient(&p, &s.order)
        })
        .collect::<Result<_>>()?;
    let adv = group_advantages(&rewards, sigma_floor);
    Ok(combine_gradients(&p, &grads, &adv))
}

/// `(1/G) Σ_j weight_j · grad_j`, exploiting the sparse form.
pub(crate) fn combine_gradients(p: &[f64], grads: &[OrderGradient], weights: &[f64]) -> Vec<f64> {
    let inv_g = 1.0 / grads.len() as f64;
    let dense: f64 = grads
        .iter()
        .zip(weights)
        .map(|(g, w)| w * g.dense_coeff)
        .sum();
    let mut out: Vec<f64> = p.iter().map(|&x| -x * dense * inv_g).collect();
    for (g, &w) in grads.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for &(i, v) in &g.sparse {
            out[i] += w * v * inv_g;
        }
    }
    out
}
