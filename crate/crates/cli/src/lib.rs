//! Subcommands of the `clpm` binary.

pub mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use clpm::eval::{
    edge_uncertainty_batch, rate_vs_uncertainty_table, reconstruction_benchmark, write_instances_csv,
    BenchmarkOptions, LsdmOptions, NodeUncertaintyRow, ScorerKind, Triple,
};
use clpm::events::{
    interval_counts, parse_events, split_edges, write_events_csv, write_nodes_csv, EdgeSplit,
    EventList, ParseOptions,
};
use clpm::inference::{fit, FitOptions, FittedModel};
use clpm::io::{read_model, write_embeddings_csv, write_loss_csv, write_model};
use clpm::model::RateKind;
use clpm::simulate::{sbm_generate, write_labels_csv, SbmSpec};
use serde::Serialize;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "clpm", version, about = "Latent trajectory models for timestamped interaction data")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the switching-community block model data.
    Simulate(SimulateArgs),
    /// Fit the variational posterior to an event file.
    Fit(FitArgs),
    /// Reconstruction AUCs and uncertainty tables for a fitted model.
    Eval(EvalArgs),
    /// Score `(source, dest, k)` queries with a fitted model.
    Score(ScoreArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Eval(_) => "eval",
            Command::Score(_) => "score",
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of nodes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Expected events per intra-community pair per segment.
    #[arg(long)]
    pub intra_rate: Option<f64>,
    /// Expected events per inter-community pair per segment.
    #[arg(long)]
    pub inter_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EventArgs {
    /// `source,dest,timestamp` file.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub directed: Option<bool>,
    /// Clock value mapped to time 0 (requires --t-max).
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    /// Clock value mapped to time 1 (requires --t-min).
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: EventArgs,
    /// Latent dimension.
    #[arg(long = "d")]
    pub d: Option<usize>,
    /// Number of intervals.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Random-walk transition scale.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Scale of the initial position (defaults to tau).
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_phi: Option<f64>,
    #[arg(long)]
    pub lr_beta: Option<f64>,
    /// Riemann sub-steps per interval for the dot-product model.
    #[arg(long)]
    pub riemann: Option<usize>,
    /// euclidean-distance or dot-product.
    #[arg(long)]
    pub kind: Option<RateKind>,
    /// Never-interacting partners sampled per node and epoch.
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Source nodes per batch.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Posterior draws per gradient step.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Fraction of interacting pairs held out for testing.
    #[arg(long)]
    pub test_frac: Option<f64>,
    #[arg(long)]
    pub val_frac: Option<f64>,
    /// Worker threads for the likelihood.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Single-threaded evaluation throughout.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict_deterministic: Option<bool>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// model.json written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// The event file the model was fitted to.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Comma-separated subset of tgne, tgne-posterior, lsdm, pa, random.
    #[arg(long, value_delimiter = ',')]
    pub scorers: Option<Vec<String>>,
    /// Posterior draws for the uncertainty tables.
    #[arg(long)]
    pub draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `source,dest,k` queries using the original node labels.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Posterior draws for the predictive mean and spread columns.
    #[arg(long)]
    pub draws: Option<usize>,
}

/// A required input was supplied neither as a flag nor in the config.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn base_config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

macro_rules! overlay {
    ($cfg:expr, $args:expr; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = v;
        })*
    };
}

macro_rules! overlay_opt {
    ($cfg:expr, $args:expr; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = Some(v);
        })*
    };
}

/// The effective configuration of a subcommand.
pub fn resolve(command: &Command) -> anyhow::Result<RunConfig> {
    Ok(match command {
        Command::Simulate(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay!(cfg, a; n, intra_rate, inter_rate);
            cfg
        }
        Command::Fit(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay!(cfg, a.input; directed);
            overlay_opt!(cfg, a.input; events, t_min, t_max);
            overlay!(cfg, a; d, k, tau, epochs, lr_phi, lr_beta, riemann, kind, mc_samples,
                test_frac, val_frac, strict_deterministic);
            overlay_opt!(cfg, a; tau0, negatives, batch, threads);
            cfg
        }
        Command::Eval(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay!(cfg, a; scorers, draws);
            overlay_opt!(cfg, a; model, events);
            cfg
        }
        Command::Score(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay!(cfg, a; draws);
            overlay_opt!(cfg, a; model, pairs);
            cfg
        }
    })
}

pub fn run(command: &Command) -> anyhow::Result<()> {
    let cfg = resolve(command)?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    match command {
        Command::Simulate(_) => simulate(&cfg),
        Command::Fit(_) => fit_model(&cfg),
        Command::Eval(_) => evaluate(&cfg),
        Command::Score(_) => score(&cfg),
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    match value {
        Some(p) => Ok(p),
        None => Err(UsageError(format!("--{flag} is required (or set \"{flag}\" in --config)")).into()),
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(dir.join(name), text + "\n").with_context(|| format!("writing {name}"))
}

fn simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    let spec = SbmSpec::switching(cfg.n, cfg.intra_rate, cfg.inter_rate, cfg.seed)?;
    let sample = sbm_generate(&spec)?;
    log::info!("simulated {} events over {} nodes", sample.events.len(), cfg.n);
    write_events_csv(&sample.events, create(&cfg.out, "events.csv")?)?;
    write_labels_csv(&sample.labels, create(&cfg.out, "labels.csv")?)?;
    write_json(&cfg.out, "spec.json", &spec)?;
    cfg.write(&cfg.out)
}

fn load_events(path: &Path, opts: &ParseOptions) -> anyhow::Result<EventList> {
    let parsed = parse_events(open(path)?, opts).with_context(|| format!("reading {}", path.display()))?;
    if parsed.dropped_self_loops > 0 {
        log::warn!("dropped {} self-loops", parsed.dropped_self_loops);
    }
    Ok(parsed.events)
}

fn fit_model(cfg: &RunConfig) -> anyhow::Result<()> {
    let path = required(&cfg.events, "events")?;
    let ev = load_events(path, &cfg.parse_options()?)?;
    log::info!("{} events, {} nodes", ev.len(), ev.num_nodes());
    let opts = FitOptions {
        threads: cfg.threads,
        strict: cfg.strict_deterministic,
    };
    let fm = fit(&ev, &cfg.hyperparams(), cfg.split(), opts)?;
    if let Some(last) = fm.loss_trace.last() {
        log::info!("final loss {last:.6}");
    }
    write_model(&fm, create(&cfg.out, "model.json")?)?;
    write_loss_csv(&fm.loss_trace, create(&cfg.out, "loss.csv")?)?;
    write_embeddings_csv(&fm, create(&cfg.out, "embeddings.csv")?)?;
    write_nodes_csv(&fm.labels, create(&cfg.out, "nodes.csv")?)?;
    cfg.write(&cfg.out)
}

fn load_model(path: &Path) -> anyhow::Result<FittedModel> {
    read_model(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Events re-read on the model's node vocabulary and clock.
fn events_for(fm: &FittedModel, path: &Path) -> anyhow::Result<EventList> {
    let opts = ParseOptions {
        directed: fm.directed,
        time_range: Some(fm.time_range),
        labels: Some(fm.labels.clone()),
    };
    load_events(path, &opts)
}

#[derive(Serialize)]
struct AucReport<'a> {
    dataset: String,
    #[serde(rename = "K")]
    k: usize,
    split: Option<clpm::events::SplitSpec>,
    /// split -> scorer -> AUC
    auc: BTreeMap<&'a str, BTreeMap<&'a str, f64>>,
    entries: &'a [clpm::eval::AucEntry],
}

#[derive(Serialize)]
struct EdgeRow {
    i: usize,
    j: usize,
    k: usize,
    #[serde(rename = "N")]
    n: u32,
    lambda_mean: f64,
    lambda_std: f64,
}

fn evaluate(cfg: &RunConfig) -> anyhow::Result<()> {
    let fm = load_model(required(&cfg.model, "model")?)?;
    let events_path = required(&cfg.events, "events")?;
    let ev = events_for(&fm, events_path)?;
    let split = match fm.split {
        Some(s) => split_edges(&ev, s.test_frac, s.val_frac, s.seed)?,
        None => EdgeSplit {
            train: ev.unique_pairs().into_iter().collect(),
            validation: BTreeSet::new(),
            test: BTreeSet::new(),
            seed: 0,
        },
    };
    let scorers = cfg
        .scorers
        .iter()
        .map(|s| s.parse::<ScorerKind>())
        .collect::<clpm::Result<Vec<_>>>()?;
    if scorers.is_empty() {
        bail!("no scorers requested");
    }
    let opts = BenchmarkOptions {
        scorers,
        draws: cfg.draws,
        lsdm: LsdmOptions {
            seed: cfg.seed,
            ..LsdmOptions::default()
        },
        seed: cfg.seed,
    };
    let bench = reconstruction_benchmark(&ev, &fm, &split, &opts)?;
    let mut table: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for e in &bench.entries {
        log::info!("{} {}: AUC {:.4}", e.split, e.scorer, e.auc);
        table.entry(e.split.as_str()).or_default().insert(e.scorer.as_str(), e.auc);
    }
    let report = AucReport {
        dataset: events_path.display().to_string(),
        k: fm.partition.num_intervals(),
        split: fm.split,
        auc: table,
        entries: &bench.entries,
    };
    write_json(&cfg.out, "auc.json", &report)?;
    write_instances_csv(&bench.instances, create(&cfg.out, "instances.csv")?)?;

    let counts = interval_counts(&ev, &fm.partition);
    let mut w = csv::Writer::from_writer(create(&cfg.out, "uncertainty_nodes.csv")?);
    for row in NodeUncertaintyRow::table(&fm, &counts) {
        w.serialize(row)?;
    }
    w.flush()?;

    let triples: Vec<Triple> = ev
        .unique_pairs()
        .into_iter()
        .flat_map(|(i, j)| (0..fm.partition.num_intervals()).map(move |k| (i, j, k)))
        .collect();
    let stats = edge_uncertainty_batch(
        &fm.state,
        &fm.partition,
        &fm.rate_model(),
        &triples,
        cfg.draws,
        clpm::rng::derive_seed(cfg.seed, 1),
    )?;
    let mut w = csv::Writer::from_writer(create(&cfg.out, "uncertainty_edges.csv")?);
    for (&(i, j, k), s) in triples.iter().zip(stats) {
        w.serialize(EdgeRow {
            i,
            j,
            k,
            n: counts.get(i, j, k),
            lambda_mean: s.mean,
            lambda_std: s.std,
        })?;
    }
    w.flush()?;

    let records = rate_vs_uncertainty_table(&ev, &fm, &counts, cfg.draws, clpm::rng::derive_seed(cfg.seed, 2))?;
    let mut w = csv::Writer::from_writer(create(&cfg.out, "rate_vs_uncertainty.csv")?);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    cfg.write(&cfg.out)
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    source: &'a str,
    dest: &'a str,
    k: usize,
    score: f64,
    lambda_mean: f64,
    lambda_std: f64,
}

fn score(cfg: &RunConfig) -> anyhow::Result<()> {
    let fm = load_model(required(&cfg.model, "model")?)?;
    let pairs_path = required(&cfg.pairs, "pairs")?;
    let index: BTreeMap<&str, usize> = fm.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(pairs_path)?);
    let mut queries = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let line = line + 2;
        if record.len() != 3 {
            bail!("{}:{line}: expected source,dest,k", pairs_path.display());
        }
        let node = |s: &str| {
            index
                .get(s)
                .copied()
                .with_context(|| format!("{}:{line}: unknown node {s:?}", pairs_path.display()))
        };
        let (i, j) = (node(&record[0])?, node(&record[1])?);
        let k: usize = record[2]
            .parse()
            .with_context(|| format!("{}:{line}: bad interval {:?}", pairs_path.display(), &record[2]))?;
        if k >= fm.partition.num_intervals() {
            bail!("{}:{line}: interval {k} out of range", pairs_path.display());
        }
        if i == j {
            bail!("{}:{line}: self-pair", pairs_path.display());
        }
        queries.push((i, j, k));
    }
    let scorer = clpm::eval::TgneScorer::new(&fm);
    let stats = edge_uncertainty_batch(&fm.state, &fm.partition, &fm.rate_model(), &queries, cfg.draws, cfg.seed)?;
    let mut w = csv::Writer::from_writer(create(&cfg.out, "scores.csv")?);
    for (&(i, j, k), s) in queries.iter().zip(stats) {
        w.serialize(ScoreRow {
            source: &fm.labels[i],
            dest: &fm.labels[j],
            k,
            score: clpm::eval::Scorer::score(&scorer, i, j, k)?,
            lambda_mean: s.mean,
            lambda_std: s.std,
        })?;
    }
    w.flush()?;
    cfg.write(&cfg.out)
}
