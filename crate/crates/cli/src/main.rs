//! `datamask` command-line tool.
//!
//! Exit codes: 0 success, 2 bad configuration, 3 unreadable or malformed
//! input, 4 numeric failure.

mod config;

use std::fmt;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use datamask::analysis::{
    cluster_heatmap, estimator_variance_probe, kmeans, load_lengths, selection_stats,
    write_heatmap, write_lengths, write_stats, write_variance, VarianceReport,
};
use datamask::baselines::{
    exhaustive_optimum, greedy_with, semdedup_filter, topk_quality, write_greedy_trajectory,
    SemdedupConfig,
};
use datamask::bench::{run_bench, write_bench, BenchConfig};
use datamask::corpus::{
    load_embeddings, load_scores, read_selection, write_embeddings, write_raw_scores,
    write_selection, EmbeddingMatrix, QualityTable, SelectionResult,
};
use datamask::fmt::sig17;
use datamask::masklearn::{write_checkpoint, write_trajectory, Init, Logits, OptimizerConfig};
use datamask::metrics::{
    DiversityKind, EvaluatorOptions, KernelCache, Objective, ObjectiveEvaluator, QualityKind,
};
use datamask::pipeline::{run_select, SelectConfig};
use datamask::{synth, Error, Result};

use config::Resolver;

#[derive(Parser)]
#[command(
    name = "datamask",
    version,
    about = "Quality and diversity subset selection for embedded corpora"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a selection mask.
    Select(SelectArgs),
    /// Greedy diversity maximization.
    Greedy(GreedyArgs),
    /// Exhaustive optimum for small corpora.
    Oracle(OracleArgs),
    /// Highest composite quality scores.
    Topk(TopkArgs),
    /// Remove near-duplicates within k-means clusters.
    Semdedup(SemdedupArgs),
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Greedy vs. mask learning wall-clock on growing corpus prefixes.
    Bench(BenchArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Per-cluster size, quality and diversity.
    Heatmap(HeatmapArgs),
    /// Token-length statistics of a selection.
    Stats(StatsArgs),
    /// Per-coordinate variance of gradient estimators.
    Variance(VarianceArgs),
}

#[derive(Clone, Copy)]
enum InitKind {
    Uniform,
    Quality,
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InitKind::Uniform),
            "quality" => Ok(InitKind::Quality),
            _ => Err(Error::Invalid(format!(
                "unknown init {s:?} (uniform or quality)"
            ))),
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Uniform => "uniform",
            InitKind::Quality => "quality",
        })
    }
}

#[derive(Clone, Copy)]
enum SynthKind {
    Random,
    Clustered,
    Anchored,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SynthKind::Random),
            "clustered" => Ok(SynthKind::Clustered),
            "anchored" => Ok(SynthKind::Anchored),
            _ => Err(Error::Invalid(format!("unknown corpus kind {s:?}"))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Random => "random",
            SynthKind::Clustered => "clustered",
            SynthKind::Anchored => "anchored",
        })
    }
}

/// Optimizer flags shared by `select` and `bench`.
#[derive(Args)]
struct OptimizerArgs {
    /// Masks sampled per epoch.
    #[arg(long = "G", alias = "group-size")]
    group_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Fraction of candidates sampled and updated per epoch.
    #[arg(long)]
    batch_ratio: Option<f64>,
    /// Lower bound on the reward standard deviation used for advantages.
    #[arg(long)]
    sigma_floor: Option<f64>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    scores: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    /// Quality weight in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    diversity: Option<DiversityKind>,
    /// Drop samples with composite quality below this first.
    #[arg(long)]
    prune_below: Option<f64>,
    /// `uniform` or `quality`.
    #[arg(long)]
    init: Option<InitKind>,
    #[arg(long)]
    l_min: Option<f64>,
    #[arg(long)]
    l_max: Option<f64>,
    /// Candidates per independently optimized shard.
    #[arg(long)]
    shard_size: Option<usize>,
    /// Draw the final mask from the learned distribution instead of top-S.
    #[arg(long)]
    sample_final: bool,
    /// Stop once the top-S objective reaches this value.
    #[arg(long)]
    stop_at: Option<f64>,
    #[arg(long)]
    out: Option<String>,
    /// Per-epoch CSV; with several shards, one file per shard with a `.K` suffix.
    #[arg(long)]
    trajectory: Option<String>,
    /// Final logits (single shard only).
    #[arg(long)]
    checkpoint: Option<String>,
}

#[derive(Args)]
struct GreedyArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    diversity: Option<DiversityKind>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    trajectory: Option<String>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    scores: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    diversity: Option<DiversityKind>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct TopkArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    scores: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SemdedupArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    embeddings: Option<String>,
    /// k-means clusters (default n/100).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Cosine above which a row counts as a duplicate.
    #[arg(long)]
    threshold: Option<f64>,
    /// Keep exactly this many rows.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    scores: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    diversity: Option<DiversityKind>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    selection: Option<String>,
    #[arg(long)]
    lengths: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct VarianceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    scores: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    diversity: Option<DiversityKind>,
    /// Group sizes, comma-separated.
    #[arg(long = "G", value_delimiter = ',')]
    group_sizes: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long)]
    embeddings: Option<String>,
    /// Prefix sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long)]
    budget_fraction: Option<f64>,
    #[arg(long)]
    diversity: Option<DiversityKind>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// `random`, `clustered` or `anchored`.
    #[arg(long)]
    kind: Option<SynthKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    shared: Option<f64>,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    scores: Option<String>,
    #[arg(long)]
    lengths: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Greedy(a) => cmd_greedy(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Topk(a) => cmd_topk(a),
        Command::Semdedup(a) => cmd_semdedup(a),
        Command::Analyze(AnalyzeCommand::Heatmap(a)) => cmd_heatmap(a),
        Command::Analyze(AnalyzeCommand::Stats(a)) => cmd_stats(a),
        Command::Analyze(AnalyzeCommand::Variance(a)) => cmd_variance(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

fn objective(lambda: f64, diversity: DiversityKind) -> Result<Objective> {
    if lambda == 1.0 {
        return Ok(Objective::quality_only());
    }
    if lambda == 0.0 {
        let obj = Objective::diversity_only(diversity);
        obj.validate()?;
        return Ok(obj);
    }
    Objective::new(lambda, diversity, QualityKind::Composite)
}

fn optimizer(
    r: &mut Resolver,
    a: &OptimizerArgs,
    budget: usize,
    seed: u64,
) -> Result<OptimizerConfig> {
    let d = OptimizerConfig::new(budget, seed);
    Ok(OptimizerConfig {
        group_size: r.or("G", a.group_size, d.group_size)?,
        learning_rate: r.or("lr", a.lr, d.learning_rate)?,
        epochs: r.or("epochs", a.epochs, d.epochs)?,
        batch_ratio: r.or("batch-ratio", a.batch_ratio, d.batch_ratio)?,
        sigma_floor: r.or("sigma-floor", a.sigma_floor, d.sigma_floor)?,
        ..d
    })
}

fn load_inputs(
    embeddings: Option<&str>,
    scores: Option<&str>,
    obj: &Objective,
) -> Result<(Option<EmbeddingMatrix>, Option<QualityTable>)> {
    let m = match embeddings {
        Some(p) => Some(load_embeddings(p)?),
        None if obj.uses_diversity() => {
            return Err(Error::Invalid("this objective needs --embeddings".into()))
        }
        None => None,
    };
    let q = match scores {
        Some(p) => Some(load_scores(p)?),
        None if obj.uses_quality() => {
            return Err(Error::Invalid("this objective needs --scores".into()))
        }
        None => None,
    };
    Ok((m, q))
}

fn print_achieved(r: &SelectionResult) {
    for (k, v) in &r.achieved {
        println!("{k} = {}", sig17(*v));
    }
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let seed = r.req("seed", a.common.seed)?;
    let budget = r.req("budget", a.budget)?;
    let lambda = r.or("lambda", a.lambda, 0.5)?;
    let diversity = r.or("diversity", a.diversity, DiversityKind::Pws)?;
    let embeddings = r.opt("embeddings", a.embeddings)?;
    let scores = r.opt("scores", a.scores)?;
    let out: String = r.req("out", a.out)?;
    let trajectory: Option<String> = r.opt("trajectory", a.trajectory)?;
    let checkpoint: Option<String> = r.opt("checkpoint", a.checkpoint)?;

    let obj = objective(lambda, diversity)?;
    let mut opt = optimizer(&mut r, &a.opt, budget, seed)?;
    opt.init = match r.or("init", a.init, InitKind::Uniform)? {
        InitKind::Uniform => Init::Uniform,
        InitKind::Quality => Init::QualityAware {
            l_min: r.or("l-min", a.l_min, -5.0)?,
            l_max: r.or("l-max", a.l_max, 5.0)?,
        },
    };
    opt.sample_final = r.switch("sample-final", a.sample_final)?;
    opt.stop_at = r.opt("stop-at", a.stop_at)?;
    opt.validate()?;
    let cfg = SelectConfig {
        prune_below: r.opt("prune-below", a.prune_below)?,
        shard_size: r.or("shard-size", a.shard_size, SelectConfig::DEFAULT_SHARD_SIZE)?,
        ..SelectConfig::new(obj, opt)
    };
    if cfg.shard_size < 1 {
        return Err(Error::Invalid("shard size must be at least 1".into()));
    }
    let needs_scores =
        cfg.prune_below.is_some() || matches!(cfg.optimizer.init, Init::QualityAware { .. });
    if needs_scores && scores.is_none() {
        return Err(Error::Invalid(
            "--prune-below and --init quality need --scores".into(),
        ));
    }

    let (m, q) = load_inputs(embeddings.as_deref(), scores.as_deref(), &obj)?;
    let mut output = run_select(m.as_ref(), q.as_ref(), &cfg)?;
    output.result.config = r.effective().clone();
    write_selection(&output.result, &out)?;
    if let Some(path) = &trajectory {
        match output.trajectories.as_slice() {
            [one] => write_trajectory(one, path)?,
            many => {
                for (k, t) in many.iter().enumerate() {
                    write_trajectory(t, format!("{path}.{k}"))?;
                }
            }
        }
    }
    if let Some(path) = &checkpoint {
        match output.logits.as_slice() {
            [(logits, epochs)] => write_checkpoint(logits, *epochs as u64, path)?,
            _ => return Err(Error::Invalid("--checkpoint needs a single shard".into())),
        }
    }
    println!(
        "selected {} of {} candidates",
        output.result.selected().len(),
        output.active
    );
    print_achieved(&output.result);
    Ok(())
}

fn cmd_greedy(a: GreedyArgs) -> Result<()> {
    let mut r = Resolver::new(a.config.as_deref())?;
    let embeddings: String = r.req("embeddings", a.embeddings)?;
    let diversity = r.req("diversity", a.diversity)?;
    let budget = r.req("budget", a.budget)?;
    let out: Option<String> = r.opt("out", a.out)?;
    let trajectory: Option<String> = r.opt("trajectory", a.trajectory)?;
    if diversity == DiversityKind::None {
        return Err(Error::Invalid("greedy needs a diversity metric".into()));
    }
    if budget < 1 {
        return Err(Error::Invalid("budget must be at least 1".into()));
    }

    let m = load_embeddings(&embeddings)?;
    let cache = match diversity {
        DiversityKind::FlMax => Some(KernelCache::build(&m, KernelCache::DEFAULT_GRAM_CAP)?),
        _ => None,
    };
    let g = greedy_with(&m, diversity, budget, cache.as_ref())?;
    if let Some(path) = &trajectory {
        write_greedy_trajectory(&g, path)?;
    }
    if let Some(path) = &out {
        let mut res = SelectionResult::new(g.selected(), budget, "greedy")?;
        res.achieved.insert(diversity.name().to_string(), g.value());
        res.config = r.effective().clone();
        write_selection(&res, path)?;
    }
    println!("{} = {}", diversity.name(), sig17(g.value()));
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let budget = r.req("budget", a.budget)?;
    let lambda = r.or("lambda", a.lambda, 0.5)?;
    let diversity = r.or("diversity", a.diversity, DiversityKind::Pws)?;
    let obj = objective(lambda, diversity)?;
    // Only the DiSF rescaling draws random subsets.
    let seed = if obj.uses_diversity() && diversity == DiversityKind::Disf {
        r.req("seed", a.common.seed)?
    } else {
        r.or("seed", a.common.seed, 0)?
    };
    let embeddings = r.opt("embeddings", a.embeddings)?;
    let scores = r.opt("scores", a.scores)?;
    let out: Option<String> = r.opt("out", a.out)?;
    if budget < 1 {
        return Err(Error::Invalid("budget must be at least 1".into()));
    }

    let (m, q) = load_inputs(embeddings.as_deref(), scores.as_deref(), &obj)?;
    let opts = EvaluatorOptions {
        warmup_size: budget,
        warmup_seed: seed,
        ..EvaluatorOptions::default()
    };
    let ev = ObjectiveEvaluator::new(obj, q.as_ref().map(|q| q.composite()), m.as_ref(), opts)?;
    let (subset, value) = exhaustive_optimum(&ev, budget)?;
    let subset_text: Vec<String> = subset.iter().map(ToString::to_string).collect();
    println!("optimum = {}", sig17(value));
    println!("subset = {}", subset_text.join(" "));
    if let Some(path) = &out {
        let mut res = SelectionResult::new(subset, budget, "oracle")?;
        res.achieved.insert("objective".into(), value);
        res.seed = seed;
        res.lambda = lambda;
        res.config = r.effective().clone();
        write_selection(&res, path)?;
    }
    Ok(())
}

fn cmd_topk(a: TopkArgs) -> Result<()> {
    let mut r = Resolver::new(a.config.as_deref())?;
    let scores: String = r.req("scores", a.scores)?;
    let budget = r.req("budget", a.budget)?;
    let out: String = r.req("out", a.out)?;
    if budget < 1 {
        return Err(Error::Invalid("budget must be at least 1".into()));
    }
    let q = load_scores(&scores)?;
    let chosen = topk_quality(q.composite(), budget)?;
    let mut res = SelectionResult::new(chosen, budget, "topk")?;
    let mean = datamask::metrics::quality_metric(res.selected(), q.composite())?;
    res.achieved.insert("quality".into(), mean);
    res.lambda = 1.0;
    res.config = r.effective().clone();
    write_selection(&res, &out)?;
    print_achieved(&res);
    Ok(())
}

fn cmd_semdedup(a: SemdedupArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let seed = r.req("seed", a.common.seed)?;
    let embeddings: String = r.req("embeddings", a.embeddings)?;
    let out: String = r.req("out", a.out)?;
    let k = r.opt("k", a.k)?;
    let iters = r.opt("iters", a.iters)?;
    let threshold = r.opt("threshold", a.threshold)?;
    let target = r.opt("target", a.target)?;
    if let Some(t) = threshold {
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::Invalid(format!(
                "threshold must lie in [-1, 1], got {t}"
            )));
        }
    }
    if k == Some(0) || iters == Some(0) || target == Some(0) {
        return Err(Error::Invalid(
            "--k, --iters and --target must be at least 1".into(),
        ));
    }

    let m = load_embeddings(&embeddings)?;
    let d = SemdedupConfig::new(m.n(), seed);
    let cfg = SemdedupConfig {
        clusters: k.unwrap_or(d.clusters),
        kmeans_iters: iters.unwrap_or(d.kmeans_iters),
        threshold: threshold.unwrap_or(d.threshold),
        target,
        ..d
    };
    let kept = semdedup_filter(&m, &cfg)?;
    let count = kept.len();
    let mut res = SelectionResult::new(kept, count, "semdedup")?;
    res.seed = seed;
    res.config = r.effective().clone();
    write_selection(&res, &out)?;
    println!("kept {count} of {}", m.n());
    Ok(())
}

fn cmd_heatmap(a: HeatmapArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let seed = r.req("seed", a.common.seed)?;
    let embeddings: String = r.req("embeddings", a.embeddings)?;
    let scores: String = r.req("scores", a.scores)?;
    let out: String = r.req("out", a.out)?;
    let k = r.or("k", a.k, 100)?;
    let iters = r.or("iters", a.iters, 50)?;
    let diversity = r.or("diversity", a.diversity, DiversityKind::Pws)?;
    if k < 1 || iters < 1 {
        return Err(Error::Invalid("--k and --iters must be at least 1".into()));
    }
    if diversity == DiversityKind::None {
        return Err(Error::Invalid("heatmap needs a diversity metric".into()));
    }

    let m = load_embeddings(&embeddings)?;
    let q = load_scores(&scores)?;
    let model = kmeans(&m, k, iters, seed)?;
    let rows = cluster_heatmap(&model, &q, &m, diversity)?;
    write_heatmap(&rows, &out)?;
    println!("{} clusters, inertia {}", rows.len(), sig17(model.inertia));
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let mut r = Resolver::new(a.config.as_deref())?;
    let selection: String = r.req("selection", a.selection)?;
    let lengths: String = r.req("lengths", a.lengths)?;
    let out: String = r.req("out", a.out)?;
    let selected = read_selection(&selection)?;
    let lengths = load_lengths(&lengths)?;
    let stats = selection_stats(&selected, &lengths)?;
    write_stats(&stats, &out)?;
    println!(
        "median length {} selected, {} corpus",
        sig17(stats.selected.median),
        sig17(stats.corpus.median)
    );
    Ok(())
}

fn cmd_variance(a: VarianceArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let seed = r.req("seed", a.common.seed)?;
    let embeddings = r.opt("embeddings", a.embeddings)?;
    let scores = r.opt("scores", a.scores)?;
    let out: String = r.req("out", a.out)?;
    let budget = r.or("budget", a.budget, 10)?;
    let lambda = r.or("lambda", a.lambda, 0.0)?;
    let diversity = r.or("diversity", a.diversity, DiversityKind::Pws)?;
    let mut groups = r.list("G", a.group_sizes)?;
    if groups.is_empty() {
        groups = vec![64];
    }
    let reps = r.or("reps", a.reps, 2000)?;
    let obj = objective(lambda, diversity)?;
    if budget < 1 {
        return Err(Error::Invalid("budget must be at least 1".into()));
    }
    if reps < 100 || groups.iter().any(|&g| g < 2) {
        return Err(Error::Invalid(
            "need --reps >= 100 and every --G >= 2".into(),
        ));
    }

    let (m, q) = load_inputs(embeddings.as_deref(), scores.as_deref(), &obj)?;
    let opts = EvaluatorOptions {
        warmup_size: budget,
        warmup_seed: seed,
        ..EvaluatorOptions::default()
    };
    let ev = ObjectiveEvaluator::new(obj, q.as_ref().map(|q| q.composite()), m.as_ref(), opts)?;
    let logits = Logits::uniform((0..ev.n()).collect());
    let report = estimator_variance_probe(&ev, &logits, budget, &groups, reps, seed)?;
    write_variance(&report, &out)?;
    if let Some(vanilla) = report.find("vanilla", 1) {
        for &g in &groups {
            if let Some(group) = report.find("group", g) {
                println!(
                    "G={g}: group variance lower in {:.1}% of coordinates",
                    100.0 * VarianceReport::lower_fraction(group, vanilla)
                );
            }
        }
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let seed = r.req("seed", a.common.seed)?;
    let embeddings: String = r.req("embeddings", a.embeddings)?;
    let out: String = r.req("out", a.out)?;
    let sizes = r.list("sizes", a.sizes)?;
    let budget_fraction = r.or("budget-fraction", a.budget_fraction, 0.1)?;
    let diversity = r.or("diversity", a.diversity, DiversityKind::Disf)?;
    let optimizer = optimizer(&mut r, &a.opt, 1, seed)?;
    optimizer.validate()?;
    let cfg = BenchConfig {
        sizes,
        budget_fraction,
        diversity,
        optimizer,
    };
    // Size bounds need the corpus; everything else is checked first.
    cfg.validate(usize::MAX)?;

    let m = load_embeddings(&embeddings)?;
    let rows = run_bench(&m, &cfg)?;
    write_bench(&rows, &out)?;
    for row in &rows {
        println!(
            "size {}: greedy {} in {:.1} ms, mask learning {} in {:.1} ms ({} epochs)",
            row.size,
            sig17(row.greedy_value),
            row.greedy_ms,
            sig17(row.datamask_value),
            row.datamask_ms,
            row.epochs_run
        );
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let seed = r.req("seed", a.common.seed)?;
    let kind = r.or("kind", a.kind, SynthKind::Random)?;
    let n = r.req("n", a.n)?;
    let d = r.or("d", a.d, 16)?;
    let embeddings: Option<String> = r.opt("embeddings", a.embeddings)?;
    let scores: Option<String> = r.opt("scores", a.scores)?;
    let lengths: Option<String> = r.opt("lengths", a.lengths)?;
    if n < 1 || d < 1 {
        return Err(Error::Invalid("--n and --d must be at least 1".into()));
    }
    let m = match kind {
        SynthKind::Random => synth::random_unit_embeddings(n, d, seed),
        SynthKind::Clustered => {
            let clusters = r.or("clusters", a.clusters, 10)?;
            let spread = r.or("spread", a.spread, 0.3)?;
            synth::clustered_embeddings(n, d, clusters, spread, seed)
        }
        SynthKind::Anchored => {
            let shared = r.or("shared", a.shared, 1.0)?;
            synth::anchored_embeddings(n, d, shared, seed)
        }
    };
    if let Some(p) = &embeddings {
        write_embeddings(&m, p)?;
    }
    if let Some(p) = &scores {
        write_raw_scores(&synth::raw_quality_scores(n, seed ^ 1), p)?;
    }
    if let Some(p) = &lengths {
        write_lengths(&synth::token_lengths(n, seed ^ 2), p)?;
    }
    Ok(())
}
