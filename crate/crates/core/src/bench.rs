//! Greedy versus mask learning on growing prefixes of one corpus.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::baselines::greedy_with;
use crate::corpus::{write_text, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::masklearn::{run_datamask, Logits, OptimizerConfig};
use crate::metrics::{DiversityKind, EvaluatorOptions, KernelCache, Objective, ObjectiveEvaluator};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub budget: usize,
    pub greedy_value: f64,
    pub greedy_ms: f64,
    pub datamask_value: f64,
    pub datamask_ms: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    /// Budget as a fraction of each size.
    pub budget_fraction: f64,
    pub diversity: DiversityKind,
    /// Template; `budget` and `stop_at` are set per size.
    pub optimizer: OptimizerConfig,
}

impl BenchConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::invalid("bench needs at least one size"));
        }
        if let Some(&s) = self.sizes.iter().find(|&&s| s < 2 || s > n) {
            return Err(Error::invalid(format!("bench size {s} outside [2, {n}]")));
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "budget fraction must lie in (0, 1], got {}",
                self.budget_fraction
            )));
        }
        if self.diversity == DiversityKind::None {
            return Err(Error::invalid("bench needs a diversity metric"));
        }
        Ok(())
    }

    pub fn budget_for(&self, size: usize) -> usize {
        ((self.budget_fraction * size as f64).round() as usize).clamp(1, size)
    }
}

/// For each size, runs greedy on the first `size` rows, then mask learning
/// until its top-`S` objective reaches the greedy value (or the epoch limit).
/// Values are the raw diversity metric.
pub fn run_bench(m: &EmbeddingMatrix, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate(m.n())?;
    cfg.optimizer.validate()?;
    cfg.sizes
        .iter()
        .map(|&size| {
            let rows: Vec<usize> = (0..size).collect();
            let sub = m.select_rows(&rows)?;
            let budget = cfg.budget_for(size);

            let t = Instant::now();
            let cache = match cfg.diversity {
                DiversityKind::FlMax => {
                    Some(KernelCache::build(&sub, KernelCache::DEFAULT_GRAM_CAP)?)
                }
                _ => None,
            };
            let greedy = greedy_with(&sub, cfg.diversity, budget, cache.as_ref())?;
            let greedy_ms = t.elapsed().as_secs_f64() * 1e3;

            let t = Instant::now();
            let opts = EvaluatorOptions {
                warmup_size: budget,
                warmup_seed: cfg.optimizer.seed,
                ..EvaluatorOptions::default()
            };
            let ev = ObjectiveEvaluator::new(
                Objective::diversity_only(cfg.diversity),
                None,
                Some(&sub),
                opts,
            )?;
            let target = ev.evaluate(&greedy.selected())?;
            let run_cfg = OptimizerConfig {
                budget,
                stop_at: Some(target),
                ..cfg.optimizer.clone()
            };
            let run = run_datamask(&ev, Logits::uniform(rows), &run_cfg)?;
            let datamask_ms = t.elapsed().as_secs_f64() * 1e3;
            Ok(BenchRow {
                size,
                budget,
                greedy_value: greedy.value(),
                greedy_ms,
                datamask_value: ev.raw_diversity(&run.selection)?,
                datamask_ms,
                epochs_run: run.epochs_run,
            })
        })
        .collect()
}

/// `size,greedy_value,greedy_ms,datamask_value,datamask_ms`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,greedy_value,greedy_ms,datamask_value,datamask_ms\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.3},{},{:.3}",
            r.size,
            sig17(r.greedy_value),
            r.greedy_ms,
            sig17(r.datamask_value),
            r.datamask_ms
        );
    }
    out
}

pub fn write_bench(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &bench_csv(rows))
}
