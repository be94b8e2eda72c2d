//! End-to-end selection: prune, shard, learn a mask per shard, merge.

use std::collections::BTreeMap;

use crate::corpus::{
    prune_by_quality, split_shards, EmbeddingMatrix, KvConfig, QualityTable, SelectionResult, Shard,
};
use crate::error::{Error, Result};
use crate::masklearn::{quality_init, run_datamask, EpochStats, Init, Logits, OptimizerConfig};
use crate::metrics::{EvaluatorOptions, Objective, ObjectiveEvaluator};

#[derive(Debug, Clone)]
pub struct SelectConfig {
    pub objective: Objective,
    /// `budget` and `seed` here are for the whole corpus.
    pub optimizer: OptimizerConfig,
    /// Drop samples whose composite is below this before selecting.
    pub prune_below: Option<f64>,
    /// Candidates per independently optimized shard.
    pub shard_size: usize,
    pub gram_cap: usize,
}

impl SelectConfig {
    pub const DEFAULT_SHARD_SIZE: usize = 1_000_000;

    pub fn new(objective: Objective, optimizer: OptimizerConfig) -> Self {
        SelectConfig {
            objective,
            optimizer,
            prune_below: None,
            shard_size: Self::DEFAULT_SHARD_SIZE,
            gram_cap: EvaluatorOptions::default().gram_cap,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectOutput {
    pub result: SelectionResult,
    /// One trajectory per shard.
    pub trajectories: Vec<Vec<EpochStats>>,
    /// Final logits and epochs run, per shard.
    pub logits: Vec<(Logits, usize)>,
    /// Candidates left after pruning.
    pub active: usize,
}

/// Splits `budget` over `sizes` in proportion, by largest remainder
/// (ties to the earlier part). No part gets more than its size.
pub fn apportion(budget: usize, sizes: &[usize]) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if budget > total {
        return Err(Error::BudgetTooLarge {
            budget,
            available: total,
        });
    }
    if total == 0 {
        return Ok(vec![0; sizes.len()]);
    }
    let mut parts: Vec<usize> = sizes.iter().map(|&s| budget * s / total).collect();
    let mut rem: Vec<(u128, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(k, &s)| ((budget as u128 * s as u128) % total as u128, k))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = budget - parts.iter().sum::<usize>();
    for &(_, k) in rem.iter().cycle() {
        if left == 0 {
            break;
        }
        if parts[k] < sizes[k] {
            parts[k] += 1;
            left -= 1;
        }
    }
    Ok(parts)
}

fn shard_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Runs mask learning over the corpus and returns the merged selection.
///
/// Either input may be absent when the objective does not need it. The
/// `achieved` map holds the raw quality and diversity of the selection and
/// the combined objective, all measured on the whole corpus.
pub fn run_select(
    embeddings: Option<&EmbeddingMatrix>,
    quality: Option<&QualityTable>,
    cfg: &SelectConfig,
) -> Result<SelectOutput> {
    cfg.objective.validate()?;
    cfg.optimizer.validate()?;
    let n = match (embeddings, quality) {
        (Some(m), Some(q)) if m.n() != q.len() => {
            return Err(Error::invalid(format!(
                "{} embeddings but {} quality scores",
                m.n(),
                q.len()
            )))
        }
        (Some(m), _) => m.n(),
        (None, Some(q)) => q.len(),
        (None, None) => return Err(Error::invalid("selection needs embeddings or scores")),
    };
    let needs_quality =
        cfg.prune_below.is_some() || matches!(cfg.optimizer.init, Init::QualityAware { .. });
    if needs_quality && quality.is_none() {
        return Err(Error::invalid(
            "pruning and quality-aware init need quality scores",
        ));
    }

    let mut in_active = vec![cfg.prune_below.is_none(); n];
    if let (Some(t), Some(q)) = (cfg.prune_below, quality) {
        for i in prune_by_quality(q, t) {
            in_active[i] = true;
        }
    }
    let shards = if cfg.shard_size >= n {
        vec![Shard::whole(n)]
    } else {
        split_shards(n, cfg.shard_size, cfg.optimizer.seed)?
    };
    let rows: Vec<Vec<usize>> = shards
        .iter()
        .map(|s| {
            s.indices
                .iter()
                .copied()
                .filter(|&i| in_active[i])
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = rows.iter().map(Vec::len).collect();
    let active = sizes.iter().sum();
    let budgets = apportion(cfg.optimizer.budget, &sizes)?;

    let mut selected = Vec::with_capacity(cfg.optimizer.budget);
    let mut trajectories = Vec::new();
    let mut logits = Vec::new();
    for (k, (rows, &budget)) in rows.iter().zip(&budgets).enumerate() {
        if budget == 0 {
            continue;
        }
        let sub_m = embeddings.map(|m| m.select_rows(rows)).transpose()?;
        let sub_q = quality.map(|q| q.subset(rows)).transpose()?;
        let opts = EvaluatorOptions {
            gram_cap: cfg.gram_cap,
            warmup_size: budget,
            warmup_seed: shard_seed(cfg.optimizer.seed, k),
            ..EvaluatorOptions::default()
        };
        let ev = ObjectiveEvaluator::new(
            cfg.objective,
            sub_q.as_ref().map(|q| q.composite()),
            sub_m.as_ref(),
            opts,
        )?;
        let local: Vec<usize> = (0..rows.len()).collect();
        let init = match cfg.optimizer.init {
            Init::Uniform => Logits::uniform(local),
            Init::QualityAware { l_min, l_max } => {
                quality_init(sub_q.as_ref().expect("checked above"), &local, l_min, l_max)?
            }
        };
        let shard_cfg = OptimizerConfig {
            budget,
            seed: shard_seed(cfg.optimizer.seed, k),
            ..cfg.optimizer.clone()
        };
        let run = run_datamask(&ev, init, &shard_cfg)?;
        selected.extend(run.selection.iter().map(|&p| rows[p]));
        trajectories.push(run.trajectory);
        logits.push((run.logits, run.epochs_run));
    }

    let mut result = SelectionResult::new(selected, cfg.optimizer.budget, "datamask")?;
    result.achieved = achieved_metrics(embeddings, quality, cfg, result.selected())?;
    result.seed = cfg.optimizer.seed;
    result.epochs = cfg.optimizer.epochs;
    result.lambda = cfg.objective.lambda;
    result.config = KvConfig::new();
    Ok(SelectOutput {
        result,
        trajectories,
        logits,
        active,
    })
}

/// Raw component values and the combined objective of `selected`.
pub fn achieved_metrics(
    embeddings: Option<&EmbeddingMatrix>,
    quality: Option<&QualityTable>,
    cfg: &SelectConfig,
    selected: &[usize],
) -> Result<BTreeMap<String, f64>> {
    let opts = EvaluatorOptions {
        gram_cap: cfg.gram_cap,
        warmup_size: selected.len(),
        warmup_seed: cfg.optimizer.seed,
        ..EvaluatorOptions::default()
    };
    let ev = ObjectiveEvaluator::new(
        cfg.objective,
        quality.map(|q| q.composite()),
        embeddings,
        opts,
    )?;
    let c = ev.components(selected)?;
    let mut out = BTreeMap::new();
    if let Some(q) = c.quality {
        out.insert("quality".to_string(), q);
    }
    if let Some(d) = c.diversity {
        out.insert(cfg.objective.diversity.name().to_string(), d);
    }
    out.insert("objective".to_string(), c.combined);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::topk_quality;
    use crate::metrics::{DiversityKind, QualityKind};
    use crate::synth::{random_unit_embeddings, uniform_composites};
    use proptest::prelude::*;

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(10, &[5, 5]).unwrap(), vec![5, 5]);
        assert_eq!(apportion(3, &[4, 4, 4]).unwrap(), vec![1, 1, 1]);
        assert_eq!(apportion(2, &[4, 4, 4]).unwrap(), vec![1, 1, 0]);
        assert_eq!(apportion(7, &[10, 3]).unwrap(), vec![5, 2]);
        assert_eq!(apportion(4, &[0, 4]).unwrap(), vec![0, 4]);
        assert!(apportion(9, &[4, 4]).is_err());
    }

    proptest! {
        #[test]
        fn apportion_sums_and_fits(sizes in prop::collection::vec(0usize..50, 1..8), frac in 0.0f64..=1.0) {
            let total: usize = sizes.iter().sum();
            let budget = (total as f64 * frac) as usize;
            let parts = apportion(budget, &sizes).unwrap();
            prop_assert_eq!(parts.iter().sum::<usize>(), budget);
            for (p, s) in parts.iter().zip(&sizes) {
                prop_assert!(p <= s);
                let exact = budget as f64 * *s as f64 / total.max(1) as f64;
                prop_assert!((*p as f64 - exact).abs() < 1.0 + 1e-9);
            }
        }
    }

    fn quick(budget: usize, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            group_size: 16,
            epochs: 60,
            learning_rate: 1.0,
            ..OptimizerConfig::new(budget, seed)
        }
    }

    #[test]
    fn pruning_restricts_candidates() {
        let q = QualityTable::from_composite(uniform_composites(100, 1)).unwrap();
        let m = random_unit_embeddings(100, 6, 1);
        let obj = Objective::new(0.5, DiversityKind::Pws, QualityKind::Composite).unwrap();
        let cfg = SelectConfig {
            prune_below: Some(7.5),
            ..SelectConfig::new(obj, quick(10, 3))
        };
        let out = run_select(Some(&m), Some(&q), &cfg).unwrap();
        assert!(out
            .result
            .selected()
            .iter()
            .all(|&i| q.composite()[i] >= 7.5));
        assert_eq!(out.active, prune_by_quality(&q, 7.5).len());
        assert!(
            out.result.achieved.contains_key("pws") && out.result.achieved.contains_key("quality")
        );
    }

    #[test]
    fn shards_split_the_budget() {
        let q = QualityTable::from_composite(uniform_composites(90, 2)).unwrap();
        let cfg = SelectConfig {
            shard_size: 30,
            ..SelectConfig::new(Objective::quality_only(), quick(9, 4))
        };
        let out = run_select(None, Some(&q), &cfg).unwrap();
        assert_eq!(out.trajectories.len(), 3);
        assert_eq!(out.result.selected().len(), 9);
        let shards = split_shards(90, 30, 4).unwrap();
        for s in shards {
            let inside = out
                .result
                .selected()
                .iter()
                .filter(|i| s.indices.contains(i))
                .count();
            assert_eq!(inside, 3);
        }
    }

    #[test]
    fn quality_init_run_and_determinism() {
        let q = QualityTable::from_composite(uniform_composites(60, 5)).unwrap();
        let mut opt = quick(6, 8);
        opt.init = Init::QualityAware {
            l_min: -5.0,
            l_max: 5.0,
        };
        opt.epochs = 200;
        let cfg = SelectConfig::new(Objective::quality_only(), opt);
        let a = run_select(None, Some(&q), &cfg).unwrap();
        let b = run_select(None, Some(&q), &cfg).unwrap();
        assert_eq!(a.result.selected(), b.result.selected());
        assert_eq!(
            a.result.selected(),
            topk_quality(q.composite(), 6).unwrap().as_slice()
        );
    }

    #[test]
    fn missing_inputs() {
        let m = random_unit_embeddings(10, 3, 0);
        let cfg = SelectConfig::new(Objective::quality_only(), quick(2, 0));
        assert!(run_select(Some(&m), None, &cfg).is_err());
        assert!(run_select(None, None, &cfg).is_err());
    }
}
