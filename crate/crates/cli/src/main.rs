//! `ofa`: dataset conversion, embedding, training and evaluation from the
//! command line.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ofa_core::convert::{convert, ConvertFormat, ConvertOptions};
use ofa_core::dataset::{load_dataset, validate_dataset, Dataset, SplitName};
use ofa_core::embedding::{collect_keys, embed_all, write_emb_file, Provider, ProviderKind, ProviderSpec};
use ofa_core::model::Checkpoint;
use ofa_core::prompt::AblationMode;
use ofa_core::tasks::{sample_episode, Hops};
use ofa_core::train::{self, DatasetEntry, MetricKind, RunConfig, Session};
use ofa_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ofa", version, about = "Graph prompting over text-attributed graphs")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Convert a raw graph family into a dataset directory.
    Convert(ConvertArgs),
    /// Check a dataset directory and print its statistics.
    Validate(DatasetArgs),
    /// Embed every text of the datasets into an OFAEMB file.
    Embed(EmbedArgs),
    /// Print the normalized text keys the datasets need embeddings for.
    DumpKeys(DumpKeysArgs),
    /// Train a model from a run config.
    Train(TrainArgs),
    /// Supervised evaluation of a checkpoint, as a JSON report.
    Eval(EvalArgs),
    /// N-way K-shot episodic evaluation of a checkpoint, as a JSON report.
    Episodes(EpisodesArgs),
    /// Write the NOI prompt node readout of every sample as CSV.
    Dump(DumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    GenericJsonl,
    CoraLike,
    KgTriples,
    MoleculePretext,
}

impl From<Format> for ConvertFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::GenericJsonl => ConvertFormat::GenericJsonl,
            Format::CoraLike => ConvertFormat::CoraLike,
            Format::KgTriples => ConvertFormat::KgTriples,
            Format::MoleculePretext => ConvertFormat::MoleculePretext,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Hash,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for SplitName {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitName::Train,
            SplitArg::Val => SplitName::Val,
            SplitArg::Test => SplitName::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Acc,
    Auc,
    Apr,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Acc => MetricKind::Acc,
            MetricArg::Auc => MetricKind::Auc,
            MetricArg::Apr => MetricKind::Apr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationArg {
    Full,
    NoNoiPrompt,
    NoClassNode,
}

impl From<AblationArg> for AblationMode {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::Full => AblationMode::Full,
            AblationArg::NoNoiPrompt => AblationMode::NoNoiPromptNode,
            AblationArg::NoClassNode => AblationMode::NoClassNode,
        }
    }
}

/// `N` for every level, or `NODE,LINK`.
fn parse_hops(s: &str) -> std::result::Result<Hops, String> {
    let num = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    match s.split_once(',') {
        Some((node, link)) => Ok(Hops {
            node: num(node)?,
            link: num(link)?,
        }),
        None => Ok(Hops::uniform(num(s)?)),
    }
}

/// `N` or `MIN..MAX` (inclusive).
fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let num = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    match s.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                return Err(format!("empty range {s}"));
            }
            Ok((lo, hi))
        }
        None => num(s).map(|n| (n, n)),
    }
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    format: Format,
    /// Raw input directory.
    #[arg(long)]
    input: PathBuf,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Dataset name (defaults to the input directory name).
    #[arg(long)]
    name: Option<String>,
    /// cora-like only: emit the co-citation link task.
    #[arg(long)]
    link: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct ProviderArgs {
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    #[arg(long)]
    dim: Option<usize>,
    /// OFAEMB file for the file provider.
    #[arg(long)]
    emb: Option<PathBuf>,
}

impl ProviderArgs {
    /// `base` with the given flags applied. `--emb` alone selects the file
    /// provider and takes its dimension from the file.
    fn apply(&self, mut base: ProviderSpec, seed: Option<u64>) -> Result<ProviderSpec> {
        let kind = match self.provider {
            Some(ProviderArg::Hash) => ProviderKind::Hash,
            Some(ProviderArg::File) => ProviderKind::File,
            None if self.emb.is_some() => ProviderKind::File,
            None => base.kind,
        };
        base.kind = kind;
        if let Some(path) = &self.emb {
            base.source = Some(path.clone());
            if self.dim.is_none() {
                base.dim = ofa_core::embedding::read_emb_file(path)?.dim();
            }
        }
        if let Some(dim) = self.dim {
            base.dim = dim;
        }
        if let Some(seed) = seed {
            base.seed = seed;
        }
        base.check()?;
        Ok(base)
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Hash provider seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DumpKeysArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Run config (JSON). Without it, every --dataset is trained supervised.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the config's datasets with supervised entries.
    #[arg(long)]
    dataset: Vec<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    ablation: Option<AblationArg>,
    #[arg(long, value_parser = parse_hops)]
    hops: Option<Hops>,
    /// Checkpoint path; the loss curve goes to `<out>.loss.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckpointArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, value_parser = parse_hops)]
    hops: Option<Hops>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    common: CheckpointArgs,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Defaults to the metric matching the task shape.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
}

#[derive(Args)]
struct EpisodesArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    common: CheckpointArgs,
    /// Part of the label split to draw classes from; all classes when the
    /// dataset has no label split.
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// `N` or `MIN..MAX`.
    #[arg(long, value_parser = parse_range, default_value = "5")]
    n_way: (usize, usize),
    /// `K` or `MIN..MAX`.
    #[arg(long, value_parser = parse_range, default_value = "0")]
    k_shot: (usize, usize),
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the sampled episodes as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    #[command(flatten)]
    common: CheckpointArgs,
    #[arg(long)]
    out: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn print_json(value: serde_json::Result<serde_json::Value>) -> Result<()> {
    let text = serde_json::to_string_pretty(&value?)?;
    writeln!(io::stdout().lock(), "{text}").map_err(io_err(Path::new("stdout")))
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<Dataset>> {
    paths.iter().map(load_dataset).collect()
}

fn run_convert(a: &ConvertArgs) -> Result<()> {
    let opts = ConvertOptions {
        name: a.name.clone(),
        seed: a.seed,
        link: a.link,
        ..ConvertOptions::default()
    };
    let ds = convert(a.format.into(), &a.input, &a.out, &opts)?;
    print_json(serde_json::to_value(&ds.manifest.stats))
}

fn run_validate(a: &DatasetArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let report = validate_dataset(&ds);
    for v in &report.violations {
        eprintln!("{v}");
    }
    if !report.is_ok() {
        return Err(Error::Config(format!("{} violations", report.violations.len())));
    }
    print_json(serde_json::to_value(ds.compute_stats()))
}

fn run_embed(a: &EmbedArgs) -> Result<()> {
    let datasets = load_all(&a.dataset)?;
    let spec = a
        .provider
        .apply(ProviderSpec::hash(ofa_core::embedding::DEFAULT_DIM, 0), a.seed)?;
    let table = embed_all(&datasets, &Provider::from_spec(&spec)?)?;
    write_emb_file(&table, &a.out)?;
    eprintln!("{} keys, dim {}", table.len(), table.dim());
    Ok(())
}

fn run_dump_keys(a: &DumpKeysArgs) -> Result<()> {
    let datasets = load_all(&a.dataset)?;
    let mut text = String::new();
    for key in collect_keys(&datasets) {
        text.push_str(&key);
        text.push('\n');
    }
    match &a.out {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("stdout"))),
    }
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None if !a.dataset.is_empty() => RunConfig::new(Vec::new()),
        None => return Err(Error::Config("train needs --config or --dataset".into())),
    };
    if !a.dataset.is_empty() {
        cfg.datasets = a.dataset.iter().map(DatasetEntry::supervised).collect();
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(m) = a.ablation {
        cfg.ablation = m.into();
    }
    if let Some(h) = a.hops {
        cfg.hops = h;
    }
    cfg.provider = a.provider.apply(cfg.provider(), None)?;
    cfg.dim = None;
    cfg.check()?;
    let out = train::train(&cfg)?;
    out.checkpoint.save(&a.out)?;
    let curve_path = PathBuf::from(format!("{}.loss.csv", a.out.display()));
    fs::write(&curve_path, out.curve_csv()).map_err(io_err(&curve_path))?;
    print_json(Ok(serde_json::json!({
        "checkpoint": a.out,
        "steps": out.steps,
        "best_epoch": out.best_epoch,
        "final_loss": out.curve.last().map(|p| p.loss),
        "validation": out.validation,
    })))
}

struct Loaded {
    ckpt: Checkpoint,
    datasets: Vec<Dataset>,
    table: ofa_core::embedding::EmbeddingTable,
    hops: Hops,
}

fn load_for_eval(c: &CheckpointArgs, paths: &[PathBuf]) -> Result<Loaded> {
    let ckpt = Checkpoint::load(&c.checkpoint)?;
    let datasets = load_all(paths)?;
    let base = train::checkpoint_provider(&ckpt).unwrap_or_else(|| ProviderSpec::hash(ckpt.params.config.dim, 0));
    let spec = c.provider.apply(base, None)?;
    if spec.dim != ckpt.params.config.dim {
        return Err(Error::DimensionMismatch {
            expected: ckpt.params.config.dim,
            found: spec.dim,
        });
    }
    let table = embed_all(&datasets, &Provider::from_spec(&spec)?)?;
    let hops = c.hops.or_else(|| train::checkpoint_hops(&ckpt)).unwrap_or_default();
    Ok(Loaded {
        ckpt,
        datasets,
        table,
        hops,
    })
}

impl Loaded {
    fn session(&self, workers: usize) -> Result<Session<'_>> {
        Session::new(
            &self.datasets,
            &self.table,
            self.hops,
            self.ckpt.params.config.ablation,
            workers,
        )
    }
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let l = load_for_eval(&a.common, std::slice::from_ref(&a.dataset))?;
    let ds = &l.datasets[0];
    let metric = a
        .metric
        .map(MetricKind::from)
        .unwrap_or_else(|| train::default_metric(ds.num_classes(), ds.is_multi_label()));
    let report = l
        .session(a.common.workers)?
        .evaluate_supervised(&l.ckpt.params, 0, a.split.into(), metric)?;
    print_json(serde_json::to_value(&report))
}

fn run_episodes(a: &EpisodesArgs) -> Result<()> {
    let l = load_for_eval(&a.common, std::slice::from_ref(&a.dataset))?;
    let ds = &l.datasets[0];
    let part: Vec<usize> = match &ds.manifest.label_splits {
        Some(ls) => match a.split {
            SplitArg::Train => ls.train.clone(),
            SplitArg::Val => ls.val.clone(),
            SplitArg::Test => ls.test.clone(),
        },
        None => (0..ds.num_classes()).collect(),
    };
    let session = l.session(a.common.workers)?;
    let report = session.evaluate_episodes(&l.ckpt.params, 0, &part, a.n_way, a.k_shot, a.episodes, a.seed)?;
    if let Some(path) = &a.out {
        let file = fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        for i in 0..a.episodes {
            let seed = ofa_core::rng::derive_seed(a.seed, "eval-episode", i as u64);
            let spec = sample_episode(ds, &part, a.n_way, a.k_shot, seed)?;
            let line = serde_json::to_string(&spec)?;
            writeln!(w, "{line}").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
    }
    print_json(serde_json::to_value(&report))
}

fn run_dump(a: &DumpArgs) -> Result<()> {
    let l = load_for_eval(&a.common, &a.dataset)?;
    let file = fs::File::create(&a.out).map_err(io_err(&a.out))?;
    let mut w = BufWriter::new(file);
    let rows = l
        .session(a.common.workers)?
        .dump_prompt_embeddings(&l.ckpt.params, &mut w)?;
    w.flush().map_err(io_err(&a.out))?;
    eprintln!("{rows} rows");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.verb {
        Verb::Convert(a) => run_convert(a),
        Verb::Validate(a) => run_validate(a),
        Verb::Embed(a) => run_embed(a),
        Verb::DumpKeys(a) => run_dump_keys(a),
        Verb::Train(a) => run_train(a),
        Verb::Eval(a) => run_eval(a),
        Verb::Episodes(a) => run_episodes(a),
        Verb::Dump(a) => run_dump(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
