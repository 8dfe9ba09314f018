//! `mgembed` command-line tool: build multi-graphs, train embeddings, export and evaluate them.

mod manifest;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mgembed::eval::{
    build_profiles, evaluate_recommendation, link_report, make_link_split, retained_graph, split_sequences, Combiner,
    LinkDomainReport, LinkEvalSplit, LogRegConfig, RecDomainReport, DEFAULT_TOPN_GRID,
};
use mgembed::gcn::EmbeddingSet;
use mgembed::multigraph::{build_from_sequences, load_edge_lists, BehaviorSequences, MultiGraph};
use mgembed::synth::{clique, sbm, star, walk_sessions, SbmParams};
use mgembed::trainer::{Checkpoint, TrainConfig, Trainer};

use manifest::{manifest_path, Manifest};

pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl From<mgembed::Error> for CliError {
    fn from(e: mgembed::Error) -> Self {
        match e {
            mgembed::Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "mgembed", version, about = "Multi-domain graph embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a multi-graph file from behavior sequences or per-domain edge lists.
    BuildGraph(BuildGraphArgs),
    /// Train embeddings on a multi-graph.
    Train(TrainArgs),
    /// Write evaluation-mode embeddings from a checkpoint.
    Export(ExportArgs),
    /// Top-N recommendation metrics against held-out sequence items.
    EvalRec(EvalRecArgs),
    /// Held-out link prediction.
    EvalLink(EvalLinkArgs),
    /// Generate synthetic graphs (and optionally sessions).
    Synth(SynthArgs),
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Tab-separated sessions: user, domain, comma-separated items[, timestamps].
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    sequences: Option<PathBuf>,
    /// Edge list for one domain, repeat once per domain in order.
    #[arg(long)]
    edges: Vec<PathBuf>,
    /// Number of domains in the sequences file (default: inferred).
    #[arg(long, requires = "sequences")]
    domains: Option<usize>,
    /// Drop co-occurrence edges seen fewer than this many times.
    #[arg(long, default_value_t = 1, requires = "sequences")]
    min_weight: u64,
    /// Build only from the training part of this holdout split (same split as eval-rec).
    #[arg(long, requires = "sequences")]
    holdout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Training settings; flags override `--config`, which overrides the defaults.
#[derive(Args, Clone)]
struct TrainFlags {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// `mgda` or `fixed:<v>` (weight of domain 1 with two domains).
    #[arg(long)]
    alpha: Option<String>,
    /// `adam` or `sgd`.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    /// Shared and output widths, `Es,E`.
    #[arg(long)]
    dims: Option<String>,
    /// Negatives per positive edge.
    #[arg(long)]
    negatives: Option<String>,
    /// Dropout rates of the shared and specific layers, `s,p`.
    #[arg(long)]
    dropout: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl TrainFlags {
    fn resolve(&self) -> CliResult<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = read(path)?;
                TrainConfig::from_text(&text, &path.display().to_string())
                    .map_err(|e| CliError::Usage(e.to_string()))?
            }
            None => TrainConfig::default(),
        };
        let seed = self.seed.map(|s| s.to_string());
        let epochs = self.epochs.map(|s| s.to_string());
        let pairs = [
            ("seed", &seed),
            ("epochs", &epochs),
            ("alpha", &self.alpha),
            ("optimizer", &self.optimizer),
            ("lr", &self.lr),
            ("dims", &self.dims),
            ("negatives", &self.negatives),
            ("dropout", &self.dropout),
            ("batch_size", &self.batch_size),
            ("threads", &self.threads),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)
                    .map_err(|e| CliError::Usage(format!("--{}: {e}", key.replace('_', "-"))))?;
            }
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
    /// Continue from a checkpoint; its config replaces the training flags.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalRecArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// The full sessions file the training graph was built from with `--holdout`.
    #[arg(long)]
    sequences: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated N values.
    #[arg(long, value_delimiter = ',')]
    topn_grid: Option<Vec<usize>>,
    /// Keep each user's train items among the candidates.
    #[arg(long)]
    include_train: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CombinerChoice {
    Add,
    Hadamard,
    Best,
}

impl CombinerChoice {
    fn combiners(self) -> Vec<Combiner> {
        match self {
            CombinerChoice::Add => vec![Combiner::Add],
            CombinerChoice::Hadamard => vec![Combiner::Hadamard],
            CombinerChoice::Best => Combiner::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct EvalLinkArgs {
    /// Graph to split; the model is trained on what remains unless `--no-train`.
    #[arg(long, required_unless_present = "split", conflicts_with = "split")]
    graph: Option<PathBuf>,
    /// A split written by an earlier `eval-link --no-train`.
    #[arg(long, requires = "embeddings")]
    split: Option<PathBuf>,
    /// Embeddings trained on the split's retained graph.
    #[arg(long, requires = "split")]
    embeddings: Option<PathBuf>,
    /// Fraction of each domain's edges held out.
    #[arg(long, default_value_t = 0.3)]
    fraction: f64,
    /// Only write the split and the retained graph.
    #[arg(long, requires = "graph")]
    no_train: bool,
    #[arg(long, value_enum, default_value = "best")]
    combiner: CombinerChoice,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Two-domain stochastic block model with correlated communities.
    Sbm2,
    Star,
    Clique,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 60)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    domains: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    /// Fraction of nodes moved to another block in every domain after the first.
    #[arg(long)]
    reassign: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write random-walk sessions for this many users.
    #[arg(long, requires = "sessions_out")]
    sessions: Option<usize>,
    #[arg(long, default_value_t = 10)]
    session_length: usize,
    #[arg(long)]
    sessions_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    write(path, &(text + "\n"))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn labels(g: &MultiGraph) -> Vec<String> {
    (0..g.n_nodes()).map(|i| g.label(i)).collect()
}

fn build_graph(args: BuildGraphArgs) -> CliResult {
    let mut manifest = Manifest::new("build-graph");
    manifest.seed = Some(args.seed);
    let graph = match &args.sequences {
        Some(path) => {
            manifest.input(path)?;
            let seqs = BehaviorSequences::load(path, args.domains)?;
            if seqs.is_empty() {
                return Err(CliError::Data(format!("{}: no sequences", path.display())));
            }
            let seqs = match args.holdout {
                Some(f) => split_sequences(&seqs, f, args.seed)?.0,
                None => seqs,
            };
            build_from_sequences(&seqs, args.min_weight)?
        }
        None => {
            for p in &args.edges {
                manifest.input(p)?;
            }
            load_edge_lists(&args.edges)?
        }
    };
    manifest.config(&serde_json::json!({
        "min_weight": args.min_weight,
        "holdout": args.holdout,
        "domains": graph.n_domains(),
    }))?;
    graph.save(&args.out)?;
    manifest.output(&args.out);
    manifest.write(&manifest_path(&args.out, false))?;
    let counts: Vec<usize> = (0..graph.n_domains()).map(|d| graph.edges(d).len()).collect();
    eprintln!(
        "{} nodes, edges per domain {counts:?} -> {}",
        graph.n_nodes(),
        args.out.display()
    );
    Ok(())
}

/// Trains to completion, checkpointing after every epoch, and writes the artifacts.
fn run_training(mut trainer: Trainer, out: &Path, manifest: &mut Manifest) -> CliResult<EmbeddingSet> {
    create_dir(out)?;
    let ckpt_path = out.join("checkpoint.json");
    let start = Instant::now();
    while !trainer.is_done() {
        trainer.run_epoch()?;
        trainer.checkpoint().save(&ckpt_path)?;
        let epoch = trainer.epochs_done();
        let losses = trainer.log().epoch_mean_losses().pop().unwrap_or_default();
        let alphas = trainer.log().epoch_mean_alphas().pop().unwrap_or_default();
        eprintln!(
            "epoch {epoch}/{}: loss {:?} alpha {:?}",
            trainer.config().epochs,
            losses.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>(),
            alphas.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>()
        );
    }
    if trainer.config().epochs == 0 {
        trainer.checkpoint().save(&ckpt_path)?;
    }
    let emb = trainer.embeddings()?;
    let graph_labels = labels(trainer.graph());
    let emb_path = out.join("embeddings.tsv");
    emb.save_tsv(&graph_labels, &emb_path)?;
    let log_path = out.join("log.csv");
    write(&log_path, &trainer.log().to_csv())?;
    let summary_path = out.join("summary.json");
    write_json(&summary_path, &trainer.log().summary(start.elapsed().as_secs_f64()))?;
    manifest.seed = Some(trainer.config().seed);
    manifest.config(trainer.config())?;
    for p in [&ckpt_path, &emb_path, &log_path, &summary_path] {
        manifest.output(p);
    }
    Ok(emb)
}

fn train(args: TrainArgs) -> CliResult {
    let mut manifest = Manifest::new("train");
    manifest.input(&args.graph)?;
    let graph = MultiGraph::load(&args.graph)?;
    let trainer = match &args.resume {
        Some(path) => {
            manifest.input(path)?;
            Trainer::resume(&graph, Checkpoint::load(path)?)?
        }
        None => Trainer::new(&graph, args.flags.resolve()?)?,
    };
    run_training(trainer, &args.out, &mut manifest)?;
    manifest.write(&manifest_path(&args.out, true))
}

fn export(args: ExportArgs) -> CliResult {
    let mut manifest = Manifest::new("export");
    manifest.input(&args.graph)?;
    manifest.input(&args.checkpoint)?;
    let graph = MultiGraph::load(&args.graph)?;
    let trainer = Trainer::resume(&graph, Checkpoint::load(&args.checkpoint)?)?;
    manifest.seed = Some(trainer.config().seed);
    manifest.config(trainer.config())?;
    trainer.embeddings()?.save_tsv(&labels(&graph), &args.out)?;
    manifest.output(&args.out);
    manifest.write(&manifest_path(&args.out, false))
}

#[derive(Serialize)]
struct RecReport {
    domains: Vec<RecDomainReport>,
}

fn eval_rec(args: EvalRecArgs) -> CliResult {
    let mut manifest = Manifest::new("eval-rec");
    manifest.seed = Some(args.seed);
    manifest.input(&args.embeddings)?;
    manifest.input(&args.sequences)?;
    let grid = args.topn_grid.clone().unwrap_or_else(|| DEFAULT_TOPN_GRID.to_vec());
    if grid.contains(&0) || grid.is_empty() {
        return Err(CliError::Usage("--topn-grid values must be positive".into()));
    }
    if !(args.holdout > 0.0 && args.holdout < 1.0) {
        return Err(CliError::Usage(format!(
            "--holdout must be in (0, 1), got {}",
            args.holdout
        )));
    }
    let (names, emb) = EmbeddingSet::load_tsv(&args.embeddings)?;
    let seqs = BehaviorSequences::load(&args.sequences, Some(emb.n_domains()))?;
    let (train, test) = split_sequences(&seqs, args.holdout, args.seed)?;
    let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let mut profiles = build_profiles(&train, &test, &index)?;
    let domains = (0..emb.n_domains())
        .map(|d| evaluate_recommendation(&mut profiles, &emb, d, &grid, !args.include_train))
        .collect::<mgembed::Result<Vec<_>>>()?;
    for r in &domains {
        if r.excluded > 0 {
            eprintln!(
                "warning: domain {}: {} users without a usable vector were excluded",
                r.domain, r.excluded
            );
        }
    }
    manifest.config(&serde_json::json!({
        "holdout": args.holdout,
        "topn_grid": grid,
        "exclude_train": !args.include_train,
    }))?;
    write_json(&args.out, &RecReport { domains })?;
    manifest.output(&args.out);
    manifest.write(&manifest_path(&args.out, false))
}

#[derive(Serialize)]
struct LinkReport {
    fraction: Option<f64>,
    domains: Vec<LinkDomainReport>,
}

fn score_links(
    splits: &[LinkEvalSplit],
    emb: &EmbeddingSet,
    choice: CombinerChoice,
) -> CliResult<Vec<LinkDomainReport>> {
    if emb.n_domains() < splits.len() {
        return Err(CliError::Data(format!(
            "embeddings have {} domains, the split has {}",
            emb.n_domains(),
            splits.len()
        )));
    }
    Ok(splits
        .iter()
        .map(|s| link_report(s, emb, &choice.combiners(), LogRegConfig::default()))
        .collect::<mgembed::Result<Vec<_>>>()?)
}

fn eval_link(args: EvalLinkArgs) -> CliResult {
    let mut manifest = Manifest::new("eval-link");
    create_dir(&args.out)?;
    let report_path = args.out.join("report.json");
    if let (Some(split_path), Some(emb_path)) = (&args.split, &args.embeddings) {
        manifest.input(split_path)?;
        manifest.input(emb_path)?;
        let splits: Vec<LinkEvalSplit> = serde_json::from_str(&read(split_path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", split_path.display())))?;
        let (_, emb) = EmbeddingSet::load_tsv(emb_path)?;
        let domains = score_links(&splits, &emb, args.combiner)?;
        write_json(
            &report_path,
            &LinkReport {
                fraction: None,
                domains,
            },
        )?;
        manifest.output(&report_path);
        return manifest.write(&manifest_path(&args.out, true));
    }

    let graph_path = args.graph.as_ref().expect("clap enforces --graph or --split");
    if !(args.fraction > 0.0 && args.fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--fraction must be in (0, 1), got {}",
            args.fraction
        )));
    }
    manifest.input(graph_path)?;
    let graph = MultiGraph::load(graph_path)?;
    let cfg = args.flags.resolve()?;
    let mut splits = (0..graph.n_domains())
        .map(|d| make_link_split(&graph, d, args.fraction, cfg.seed))
        .collect::<mgembed::Result<Vec<_>>>()?;
    let retained = retained_graph(&graph, &mut splits)?;
    let split_path = args.out.join("split.json");
    write_json(&split_path, &splits)?;
    let retained_path = args.out.join("retained_graph.txt");
    retained.save(&retained_path)?;
    manifest.output(&split_path);
    manifest.output(&retained_path);
    if args.no_train {
        manifest.seed = Some(cfg.seed);
        manifest.config(&serde_json::json!({ "fraction": args.fraction }))?;
        return manifest.write(&manifest_path(&args.out, true));
    }
    let emb = run_training(Trainer::new(&retained, cfg)?, &args.out, &mut manifest)?;
    let domains = score_links(&splits, &emb, args.combiner)?;
    for r in &domains {
        eprintln!("domain {}: AUC {:.4} F1 {:.4} ({})", r.domain, r.auc, r.f1, r.combiner);
    }
    write_json(
        &report_path,
        &LinkReport {
            fraction: Some(args.fraction),
            domains,
        },
    )?;
    manifest.output(&report_path);
    manifest.write(&manifest_path(&args.out, true))
}

fn synth(args: SynthArgs) -> CliResult {
    let mut manifest = Manifest::new("synth");
    manifest.seed = Some(args.seed);
    let graph = match args.kind {
        SynthKind::Sbm2 => {
            let defaults = SbmParams::default();
            let params = SbmParams {
                n_nodes: args.nodes,
                blocks: args.blocks,
                n_domains: args.domains,
                p_in: args.p_in.unwrap_or(defaults.p_in),
                p_out: args.p_out.unwrap_or(defaults.p_out),
                reassign: args.reassign.unwrap_or(defaults.reassign),
                ..defaults
            };
            manifest.config(&params)?;
            sbm(params, args.seed)?.graph
        }
        SynthKind::Star => star(args.nodes, args.domains)?,
        SynthKind::Clique => clique(args.nodes, args.domains)?,
    };
    graph.save(&args.out)?;
    manifest.output(&args.out);
    if let (Some(users), Some(path)) = (args.sessions, &args.sessions_out) {
        let seqs = walk_sessions(&graph, users, args.session_length, args.seed)?;
        write(path, &seqs.to_text())?;
        manifest.output(path);
    }
    manifest.write(&manifest_path(&args.out, false))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildGraph(a) => build_graph(a),
        Command::Train(a) => train(a),
        Command::Export(a) => export(a),
        Command::EvalRec(a) => eval_rec(a),
        Command::EvalLink(a) => eval_link(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: numerical failure: {msg}");
            ExitCode::from(4)
        }
    }
}
