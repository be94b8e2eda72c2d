//! Monte-Carlo probes of the score function.

use super::policy::{order_gradient, sample_order_probs, softmax_probs};
use super::stream_rng;
use crate::error::{Error, Result};

/// Per-coordinate Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Mean of `∇ ln P(order | L)` over `trials` independent masks.
pub fn score_function_probe(
    logits: &[f64],
    budget: usize,
    trials: usize,
    seed: u64,
) -> Result<ProbeResult> {
    reward_gradient_probe(logits, budget, trials, seed, |_| 1.0)
}

/// Mean of `reward(order) · ∇ ln P(order | L)`, an unbiased estimate of the
/// gradient of `E[reward]`.
pub fn reward_gradient_probe<F>(
    logits: &[f64],
    budget: usize,
    trials: usize,
    seed: u64,
    reward: F,
) -> Result<ProbeResult>
where
    F: Fn(&[usize]) -> f64,
{
    if trials < 1000 {
        return Err(Error::invalid(format!(
            "probe needs at least 1000 trials, got {trials}"
        )));
    }
    let n = logits.len();
    let p = softmax_probs(logits);
    let mut rng = stream_rng(seed, 0, 0);
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..trials {
        let order = sample_order_probs(&p, budget, &mut rng)?;
        let f = reward(&order);
        let g = order_gradient(&p, &order)?.to_dense(&p);
        for i in 0..n {
            let x = f * g[i];
            sum[i] += x;
            sum_sq[i] += x * x;
        }
    }
    let t = trials as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let std_err = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / t - m * m).max(0.0) * t / (t - 1.0) / t).sqrt())
        .collect();
    Ok(ProbeResult { mean, std_err })
}

/// `Φ(μ√G / (2σ))`: the probability that the group-relative estimator beats
/// the plain one on variance, under a Gaussian reward model.
pub fn variance_reduction_probability(mu: f64, sigma: f64, g: usize) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if g < 1 {
        return Err(Error::invalid("group size must be at least 1"));
    }
    let x = mu * (g as f64).sqrt() / (2.0 * sigma);
    Ok(0.5 * libm::erfc(-x / std::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_values() {
        assert_eq!(variance_reduction_probability(0.0, 1.0, 16).unwrap(), 0.5);
        // Φ(1) from the alternating Maclaurin series of erf.
        let x = 1.0 / std::f64::consts::SQRT_2;
        let mut erf = 0.0;
        let mut term = x;
        for k in 0..40 {
            erf += term / (2 * k + 1) as f64;
            term *= -x * x / (k + 1) as f64;
        }
        erf *= 2.0 / std::f64::consts::PI.sqrt();
        let phi1 = 0.5 * (1.0 + erf);
        let got = variance_reduction_probability(2.0, 1.0, 1).unwrap();
        assert!((got - phi1).abs() < 1e-12 && (got - 0.841345).abs() < 1e-6);
        let mut last = 0.5;
        for mu in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let v = variance_reduction_probability(mu, 1.0, 4).unwrap();
            assert!(v > last && v <= 1.0);
            last = v;
        }
        assert!(last > 1.0 - 1e-12);
        assert!(variance_reduction_probability(1.0, 0.0, 4).is_err());
        assert!(variance_reduction_probability(1.0, -1.0, 4).is_err());
    }

    #[test]
    fn too_few_trials() {
        assert!(score_function_probe(&[0.0; 4], 2, 999, 0).is_err());
    }

    #[test]
    fn score_function_has_zero_mean() {
        let uniform = vec![0.0; 20];
        let skewed: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        for l in [uniform, skewed] {
            let r = score_function_probe(&l, 5, 100_000, 17).unwrap();
            for (m, se) in r.mean.iter().zip(&r.std_err) {
                assert!(m.abs() <= 4.0 * se, "{m} vs se {se}");
            }
        }
    }
}
