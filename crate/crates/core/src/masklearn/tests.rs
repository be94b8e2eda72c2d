use std::collections::BTreeMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::baselines::topk_quality;
use crate::corpus::QualityTable;
use crate::metrics::{DiversityKind, EvaluatorOptions, Objective, ObjectiveEvaluator, QualityKind};
use crate::synth::{random_unit_embeddings, uniform_composites};

fn random_logits(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
}

// Probability of a realized order, multiplying sequential renormalized draws.
fn sequential_prob(logits: &[f64], order: &[usize]) -> f64 {
    let w: Vec<f64> = logits.iter().map(|l| l.exp()).collect();
    let mut left: f64 = w.iter().sum();
    let mut prob = 1.0;
    for &i in order {
        prob *= w[i] / left;
        left -= w[i];
    }
    prob
}

#[test]
fn orders_sum_to_set_probability_and_sets_to_one() {
    for (n, s) in [(4, 2), (5, 3), (6, 2), (6, 3)] {
        let l = random_logits(n, (n * 10 + s) as u64);
        let mut total = 0.0;
        for set in (0..n).combinations(s) {
            let exact: f64 = set
                .iter()
                .copied()
                .permutations(s)
                .map(|o| sequential_prob(&l, &o))
                .sum();
            let via_log: f64 = set
                .iter()
                .copied()
                .permutations(s)
                .map(|o| order_log_prob(&l, &o).unwrap().exp())
                .sum();
            assert!((exact - via_log).abs() < 1e-13);
            total += via_log;
        }
        assert!((total - 1.0).abs() < 1e-12, "n={n} s={s}: {total}");
    }
}

#[test]
fn sampled_sets_follow_exact_set_probabilities() {
    let l = random_logits(5, 77);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let draws = 200_000;
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for _ in 0..draws {
        let mut o = sample_order(&l, 2, &mut rng).unwrap();
        o.sort_unstable();
        *counts.entry(o).or_default() += 1;
    }
    for set in (0..5).combinations(2) {
        let p: f64 = set
            .iter()
            .copied()
            .permutations(2)
            .map(|o| sequential_prob(&l, &o))
            .sum();
        let freq = *counts.get(&set).unwrap_or(&0) as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * sigma, "{set:?}: {freq} vs {p}");
    }
}

#[test]
fn reward_weighted_score_matches_exact_expectation_gradient() {
    let n = 6;
    let l = random_logits(n, 5);
    let value = [0.9, 0.1, 0.5, 0.3, 0.8, 0.2];
    let reward = |o: &[usize]| {
        o.iter().map(|&i| value[i]).sum::<f64>()
            + 0.4 * (o.contains(&0) && o.contains(&4)) as u8 as f64
    };
    let expected = |l: &[f64]| -> f64 {
        (0..n)
            .permutations(2)
            .map(|o| sequential_prob(l, &o) * reward(&o))
            .sum()
    };
    let h = 1e-6;
    let fd: Vec<f64> = (0..n)
        .map(|i| {
            let mut up = l.clone();
            up[i] += h;
            let mut dn = l.clone();
            dn[i] -= h;
            (expected(&up) - expected(&dn)) / (2.0 * h)
        })
        .collect();
    let probe = reward_gradient_probe(&l, 2, 400_000, 3, reward).unwrap();
    let err = probe
        .mean
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err / norm < 0.05, "relative error {}", err / norm);
}

#[test]
fn update_boundaries() {
    let l = Logits::new(random_logits(5, 1), (0..5).collect()).unwrap();
    let centered = update_logits(&l, &[0.0; 5], 3.0).unwrap();
    assert_eq!(centered, l);
    let g = [0.3, -0.1, 0.2, -0.4, 0.0];
    assert_eq!(update_logits(&l, &g, 0.0).unwrap(), l);

    let stepped = update_logits(&l, &g, 2.0).unwrap();
    let direct: Vec<f64> = l.values().iter().zip(g).map(|(a, b)| a + 2.0 * b).collect();
    for (a, b) in stepped.probs().iter().zip(softmax_probs(&direct)) {
        assert!((a - b).abs() < 1e-12);
    }
    let bad = update_logits(&l, &[0.0, f64::INFINITY, 0.0, 0.0, 0.0], 1.0);
    assert!(matches!(bad, Err(Error::NonFiniteLogit { index: 1 })));
    assert!(update_logits(&l, &[0.0; 4], 1.0).is_err());
}

#[test]
fn update_keeps_zero_mean() {
    let l = Logits::uniform((0..6).collect());
    let g = grad_order_log_prob(l.values(), &[2, 4]).unwrap();
    let next = update_logits(&l, &g, 10.0).unwrap();
    assert!(next.values().iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn quality_init_anchors() {
    let q = QualityTable::from_composite(vec![15.0, 0.0, 7.5, 3.0]).unwrap();
    let l = quality_init(&q, &[0, 1, 2, 3], -5.0, 5.0).unwrap();
    assert_eq!(l.values(), &[5.0, -5.0, 0.0, -3.0]);
    let sub = quality_init(&q, &[2, 0], -5.0, 5.0).unwrap();
    assert_eq!(
        (sub.values(), sub.candidate_map()),
        (&[0.0, 5.0][..], &[2, 0][..])
    );
    assert!(quality_init(&q, &[0], 1.0, 1.0).is_err());
}

#[test]
fn top_positions_break_ties_by_row() {
    let l = Logits::new(vec![1.0, 2.0, 1.0, 1.0], vec![30, 10, 20, 5]).unwrap();
    assert_eq!(l.top_positions(2), vec![1, 3]);
    assert_eq!(l.top_rows(3), vec![5, 10, 20]);
}

#[test]
fn batch_sizes_round_as_specified() {
    assert_eq!(batch_sizes(1_000_000, 100_000, 0.05), (50_000, 5_000));
    assert_eq!(batch_sizes(10, 1, 0.1), (1, 1));
    assert_eq!(batch_sizes(101, 3, 0.5), (51, 2));
    assert_eq!(batch_sizes(7, 3, 1.0), (7, 3));
}

#[test]
fn config_validation() {
    let ok = OptimizerConfig::new(3, 0);
    assert!(ok.validate().is_ok());
    for bad in [
        OptimizerConfig {
            group_size: 1,
            ..ok.clone()
        },
        OptimizerConfig {
            budget: 0,
            ..ok.clone()
        },
        OptimizerConfig {
            epochs: 0,
            ..ok.clone()
        },
        OptimizerConfig {
            batch_ratio: 0.0,
            ..ok.clone()
        },
        OptimizerConfig {
            batch_ratio: 1.5,
            ..ok.clone()
        },
        OptimizerConfig {
            learning_rate: f64::NAN,
            ..ok.clone()
        },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn stream_rngs_are_distinct_and_reproducible() {
    let a: u64 = stream_rng(1, 2, 3).random();
    assert_eq!(a, stream_rng(1, 2, 3).random::<u64>());
    assert_ne!(a, stream_rng(1, 2, 4).random::<u64>());
    assert_ne!(a, stream_rng(1, 3, 3).random::<u64>());
    assert_ne!(a, stream_rng(2, 2, 3).random::<u64>());
}

fn quality_run(composite: &[f64], cfg: &OptimizerConfig) -> DatamaskRun {
    let ev = ObjectiveEvaluator::new(
        Objective::quality_only(),
        Some(composite),
        None,
        EvaluatorOptions::default(),
    )
    .unwrap();
    run_datamask(&ev, Logits::uniform((0..composite.len()).collect()), cfg).unwrap()
}

#[test]
fn pure_quality_recovers_top_k() {
    let mut hits = 0;
    for seed in 0..5 {
        let q = uniform_composites(40, 500 + seed);
        let cfg = OptimizerConfig {
            group_size: 64,
            learning_rate: 0.05,
            epochs: 2000,
            ..OptimizerConfig::new(5, seed)
        };
        let run = quality_run(&q, &cfg);
        hits += (run.selection == topk_quality(&q, 5).unwrap()) as usize;
    }
    assert!(hits >= 4, "{hits}/5");
}

#[test]
fn mixed_objective_reaches_exhaustive_optimum() {
    let m = random_unit_embeddings(12, 4, 2);
    let q = uniform_composites(12, 3);
    let obj = Objective::new(0.5, DiversityKind::Pws, QualityKind::Composite).unwrap();
    let ev = ObjectiveEvaluator::new(obj, Some(&q), Some(&m), EvaluatorOptions::default()).unwrap();
    let best = (0..12)
        .combinations(4)
        .map(|u| ev.evaluate(&u).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let cfg = OptimizerConfig {
        group_size: 64,
        epochs: 2000,
        learning_rate: 1.0,
        ..OptimizerConfig::new(4, 11)
    };
    let run = run_datamask(&ev, Logits::uniform((0..12).collect()), &cfg).unwrap();
    assert!(
        run.objective >= best - 0.01 * best.abs(),
        "{} vs {best}",
        run.objective
    );
    assert_eq!(run.trajectory.len(), 2000);
}

#[test]
fn constant_rewards_leave_logits_untouched() {
    let q = vec![6.0; 30];
    let table = QualityTable::from_composite(q.clone()).unwrap();
    let init = quality_init(&table, &(0..30).collect::<Vec<_>>(), -5.0, 5.0).unwrap();
    let ev = ObjectiveEvaluator::new(
        Objective::quality_only(),
        Some(&q),
        None,
        EvaluatorOptions::default(),
    )
    .unwrap();
    let cfg = OptimizerConfig {
        group_size: 8,
        epochs: 50,
        batch_ratio: 0.5,
        ..OptimizerConfig::new(5, 4)
    };
    let run = run_datamask(&ev, init.clone(), &cfg).unwrap();
    assert_eq!(run.logits, init);
    assert!(run.trajectory.iter().all(|s| s.grad_norm == 0.0));
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let m = random_unit_embeddings(60, 8, 5);
    let q = uniform_composites(60, 6);
    let obj = Objective::new(0.3, DiversityKind::Pws, QualityKind::Composite).unwrap();
    let ev = ObjectiveEvaluator::new(obj, Some(&q), Some(&m), EvaluatorOptions::default()).unwrap();
    let cfg = OptimizerConfig {
        group_size: 16,
        epochs: 40,
        batch_ratio: 0.5,
        ..OptimizerConfig::new(6, 99)
    };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_datamask(&ev, Logits::uniform((0..60).collect()), &cfg).unwrap())
    };
    let a = run_with(1);
    let b = run_with(4);
    assert_eq!(a.selection, b.selection);
    let bits = |r: &DatamaskRun| {
        r.logits
            .values()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    for (x, y) in a.trajectory.iter().zip(&b.trajectory) {
        assert_eq!(x.mean_reward.to_bits(), y.mean_reward.to_bits());
        assert_eq!(x.grad_norm.to_bits(), y.grad_norm.to_bits());
    }
}

#[test]
fn batch_updates_touch_only_the_universe() {
    let q = uniform_composites(40, 8);
    let cfg = OptimizerConfig {
        group_size: 4,
        epochs: 1,
        batch_ratio: 0.25,
        ..OptimizerConfig::new(8, 8)
    };
    let run = quality_run(&q, &cfg);
    let v = run.logits.values();
    let mode = v
        .iter()
        .filter(|&&x| v.iter().filter(|&&y| y == x).count() >= 30)
        .count();
    // 30 untouched logits share one value (the mean shift).
    assert_eq!(mode, 30);
}

#[test]
fn early_stop_and_sampled_final() {
    let q = uniform_composites(50, 12);
    let cfg = OptimizerConfig {
        group_size: 16,
        epochs: 1000,
        stop_at: Some(0.0),
        check_every: 5,
        ..OptimizerConfig::new(5, 1)
    };
    let run = quality_run(&q, &cfg);
    assert_eq!(run.epochs_run, 5);
    let sampled = quality_run(
        &q,
        &OptimizerConfig {
            sample_final: true,
            epochs: 3,
            stop_at: None,
            ..cfg
        },
    );
    assert_eq!(sampled.selection.len(), 5);
    assert!(sampled.selection.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn budget_too_large_is_rejected() {
    let q = uniform_composites(5, 0);
    let ev = ObjectiveEvaluator::new(
        Objective::quality_only(),
        Some(&q),
        None,
        EvaluatorOptions::default(),
    )
    .unwrap();
    let r = run_datamask(
        &ev,
        Logits::uniform((0..5).collect()),
        &OptimizerConfig::new(6, 0),
    );
    assert!(matches!(r, Err(Error::BudgetTooLarge { .. })));
}

#[test]
fn trajectory_header() {
    let csv = trajectory_csv(&[EpochStats {
        epoch: 1,
        mean_reward: 0.5,
        best_reward: 0.75,
        grad_norm: 2.0,
        wallclock_ms: 1.5,
    }]);
    assert_eq!(
        csv,
        "epoch,mean_reward,best_reward,grad_norm,wallclock_ms\n1,0.5,0.75,2,1.500\n"
    );
}
