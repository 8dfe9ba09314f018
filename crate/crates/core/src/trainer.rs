//! Training loop.
//!
//! Every step draws one batch per domain, runs a dropout forward pass, computes each
//! domain's gradients, steps every `Θ_d` on its own gradient, picks the domain
//! weights `α` and steps `Θ_s` on the weighted shared gradient. An epoch is one pass
//! over the positives of the largest domain; smaller domains cycle through theirs
//! with a reshuffle at every wrap.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{
    forward_all, init_params, Dims, DropoutRates, EmbeddingSet, FeatureMatrix, GraphOperators, ModelParams,
};
use crate::mgda::{
    apply_updates_with_direction, combine_shared, fixed_alpha_weights, normalize_gradient, solve_alpha, DomainWeights,
    FrankWolfeConfig, OptimizerMethod, OptimizerState,
};
use crate::multigraph::MultiGraph;
use crate::objective::{backward_from_forward, GradientBundle, NegativeDistribution, NegativeSampler, SampleBatch};
use crate::rng::{indexed_stream, stream, Rng};

/// How the shared-parameter weights are chosen each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaMode {
    /// Minimum-norm combination of the normalized shared gradients.
    Mgda,
    /// Constant `(α, 1-α)`; two domains only.
    Fixed(f64),
}

impl std::str::FromStr for AlphaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mgda" {
            return Ok(AlphaMode::Mgda);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            let a: f64 = v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad fixed α {v:?}")))?;
            fixed_alpha_weights(a)?;
            return Ok(AlphaMode::Fixed(a));
        }
        Err(Error::InvalidConfig(format!(
            "alpha mode must be `mgda` or `fixed:<value>`, got {s:?}"
        )))
    }
}

impl std::fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlphaMode::Mgda => f.write_str("mgda"),
            AlphaMode::Fixed(a) => write!(f, "fixed:{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Negatives per positive.
    pub negatives: usize,
    pub shared_dim: usize,
    pub embed_dim: usize,
    pub dropout: DropoutRates,
    pub optimizer: OptimizerMethod,
    pub learning_rate: f64,
    pub alpha: AlphaMode,
    pub neg_distribution: NegativeDistribution,
    pub seed: u64,
    /// Worker threads for per-domain gradients; 1 is fully sequential.
    pub threads: usize,
    /// Step `Θ_s` on the α-weighted normalized gradients instead of the raw ones.
    pub step_on_normalized: bool,
    pub frank_wolfe: FrankWolfeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 256,
            negatives: 2,
            shared_dim: 64,
            embed_dim: 16,
            dropout: DropoutRates::default(),
            optimizer: OptimizerMethod::Adam,
            learning_rate: 0.01,
            alpha: AlphaMode::Mgda,
            neg_distribution: NegativeDistribution::Degree075,
            seed: 0,
            threads: 1,
            step_on_normalized: false,
            frank_wolfe: FrankWolfeConfig::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value {v:?} for `{key}`")))
}

fn parse_pair<T: std::str::FromStr>(key: &str, v: &str) -> Result<(T, T)> {
    let (a, b) = v
        .split_once(',')
        .ok_or_else(|| Error::InvalidConfig(format!("`{key}` expects two comma-separated values")))?;
    Ok((parse_value(key, a.trim())?, parse_value(key, b.trim())?))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("negatives", self.negatives),
            ("shared_dim", self.shared_dim),
            ("embed_dim", self.embed_dim),
            ("threads", self.threads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("`{name}` must be at least 1")));
            }
        }
        self.dropout.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let AlphaMode::Fixed(a) = self.alpha {
            fixed_alpha_weights(a)?;
        }
        if self.frank_wolfe.max_iters == 0 || self.frank_wolfe.tol.is_nan() || self.frank_wolfe.tol < 0.0 {
            return Err(Error::InvalidConfig(
                "Frank-Wolfe needs ≥ 1 iteration and tol ≥ 0".into(),
            ));
        }
        Ok(())
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "epochs" => self.epochs = parse_value(key, v)?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "negatives" => self.negatives = parse_value(key, v)?,
            "dims" => (self.shared_dim, self.embed_dim) = parse_pair(key, v)?,
            "shared_dim" => self.shared_dim = parse_value(key, v)?,
            "embed_dim" => self.embed_dim = parse_value(key, v)?,
            "dropout" => {
                let (s, p) = parse_pair(key, v)?;
                self.dropout = DropoutRates { shared: s, specific: p };
            }
            "dropout_shared" => self.dropout.shared = parse_value(key, v)?,
            "dropout_specific" => self.dropout.specific = parse_value(key, v)?,
            "optimizer" => self.optimizer = v.parse()?,
            "lr" | "learning_rate" => self.learning_rate = parse_value(key, v)?,
            "alpha" => self.alpha = v.parse()?,
            "neg_distribution" => self.neg_distribution = v.parse()?,
            "seed" => self.seed = parse_value(key, v)?,
            "threads" => self.threads = parse_value(key, v)?,
            "step_on_normalized" => self.step_on_normalized = parse_value(key, v)?,
            "fw_iters" => self.frank_wolfe.max_iters = parse_value(key, v)?,
            "fw_tol" => self.frank_wolfe.tol = parse_value(key, v)?,
            other => return Err(Error::InvalidConfig(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines (with `#` comments) on top of `self`.
    pub fn apply_text(&mut self, text: &str, source_name: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, k + 1, "expected `key = value`"))?;
            self.set(key, value)
                .map_err(|e| Error::parse(source_name, k + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, source_name: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text, source_name)?;
        Ok(cfg)
    }

    /// The config as `key = value` lines; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("negatives", self.negatives.to_string());
        kv("dims", format!("{},{}", self.shared_dim, self.embed_dim));
        kv(
            "dropout",
            format!("{:?},{:?}", self.dropout.shared, self.dropout.specific),
        );
        kv("optimizer", self.optimizer.to_string());
        kv("lr", format!("{:?}", self.learning_rate));
        kv("alpha", self.alpha.to_string());
        kv("neg_distribution", self.neg_distribution.to_string());
        kv("seed", self.seed.to_string());
        kv("threads", self.threads.to_string());
        kv("step_on_normalized", self.step_on_normalized.to_string());
        kv("fw_iters", self.frank_wolfe.max_iters.to_string());
        kv("fw_tol", format!("{:?}", self.frank_wolfe.tol));
        out
    }
}

/// Cycles through one domain's edges in shuffled order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStream {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl EdgeStream {
    pub fn new(n_edges: usize, rng: Rng) -> Self {
        EdgeStream {
            order: (0..n_edges).collect(),
            pos: n_edges,
            rng,
        }
    }

    /// Up to `k` edge indices, never crossing a reshuffle; each edge is drawn once per pass.
    pub fn next_chunk(&mut self, k: usize) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + k).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }

    /// Random orientation for an edge, so both endpoints serve as negative anchors.
    fn flip(&mut self) -> bool {
        self.rng.gen()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub losses: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    /// `step,epoch,loss_1..loss_D,alpha_1..alpha_D`
    pub fn to_csv(&self) -> String {
        let d = self.rows.first().map_or(0, |r| r.losses.len());
        let mut out = String::from("step,epoch");
        for k in 1..=d {
            write!(out, ",loss_{k}").unwrap();
        }
        for k in 1..=d {
            write!(out, ",alpha_{k}").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{}", r.step, r.epoch).unwrap();
            for v in r.losses.iter().chain(&r.alphas) {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn n_epochs(&self) -> usize {
        self.rows.iter().map(|r| r.epoch + 1).max().unwrap_or(0)
    }

    /// Mean per-step loss of each domain, one vector per epoch.
    pub fn epoch_mean_losses(&self) -> Vec<Vec<f64>> {
        self.per_epoch_mean(|r| &r.losses)
    }

    pub fn epoch_mean_alphas(&self) -> Vec<Vec<f64>> {
        self.per_epoch_mean(|r| &r.alphas)
    }

    fn per_epoch_mean(&self, pick: impl Fn(&LogRow) -> &Vec<f64>) -> Vec<Vec<f64>> {
        (0..self.n_epochs())
            .map(|e| {
                let rows: Vec<&LogRow> = self.rows.iter().filter(|r| r.epoch == e).collect();
                let d = rows.first().map_or(0, |r| pick(r).len());
                (0..d)
                    .map(|k| rows.iter().map(|r| pick(r)[k]).sum::<f64>() / rows.len() as f64)
                    .collect()
            })
            .collect()
    }

    pub fn mean_alpha(&self) -> Vec<f64> {
        let d = self.rows.first().map_or(0, |r| r.alphas.len());
        (0..d)
            .map(|k| self.rows.iter().map(|r| r.alphas[k]).sum::<f64>() / self.rows.len().max(1) as f64)
            .collect()
    }

    pub fn summary(&self, wall_time_secs: f64) -> TrainSummary {
        TrainSummary {
            steps: self.rows.len(),
            epochs: self.n_epochs(),
            final_losses: self.epoch_mean_losses().pop().unwrap_or_default(),
            mean_alpha: self.mean_alpha(),
            wall_time_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub epochs: usize,
    /// Mean step loss per domain over the last epoch.
    pub final_losses: Vec<f64>,
    pub mean_alpha: Vec<f64>,
    pub wall_time_secs: f64,
}

/// Everything that evolves during training; enough to resume bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    /// Completed epochs.
    pub epoch: usize,
    pub step: usize,
    streams: Vec<EdgeStream>,
    negative_rngs: Vec<Rng>,
    dropout_rng: Rng,
    last_alpha: DomainWeights,
    pub log: TrainLog,
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub graph_fingerprint: u64,
    pub state: TrainState,
}

impl Checkpoint {
    /// Writes to a sibling temp file, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string(self)?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: header.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Checks that training can start on `g` with `cfg`.
pub fn validate_training_input(g: &MultiGraph, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    for d in 0..g.n_domains() {
        if g.edges(d).is_empty() {
            return Err(Error::InvalidInput(format!("domain {d} has no edges")));
        }
    }
    if let AlphaMode::Fixed(_) = cfg.alpha {
        if g.n_domains() != 2 {
            return Err(Error::InvalidConfig(format!(
                "fixed α needs exactly two domains, graph has {}",
                g.n_domains()
            )));
        }
    }
    Ok(())
}

/// Names of the random streams the trainer derives from the seed.
pub mod streams {
    pub const INIT: &str = "init";
    pub const DROPOUT: &str = "dropout";
    /// indexed by domain
    pub const EDGES: &str = "edges";
    /// indexed by domain
    pub const NEGATIVES: &str = "negatives";
}

pub struct Trainer<'g> {
    graph: &'g MultiGraph,
    ops: GraphOperators,
    x0: FeatureMatrix,
    samplers: Vec<NegativeSampler>,
    pool: Option<rayon::ThreadPool>,
    state: TrainState,
    elapsed: f64,
}

impl<'g> Trainer<'g> {
    /// Fresh run with identity node features.
    pub fn new(graph: &'g MultiGraph, cfg: TrainConfig) -> Result<Self> {
        validate_training_input(graph, &cfg)?;
        let n = graph.n_nodes();
        let dims = Dims::new(n, cfg.shared_dim, cfg.embed_dim);
        let params = init_params(dims, graph.n_domains(), &mut stream(cfg.seed, streams::INIT))?;
        let optimizer = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &params)?;
        let state = TrainState {
            streams: (0..graph.n_domains())
                .map(|d| EdgeStream::new(graph.edges(d).len(), indexed_stream(cfg.seed, streams::EDGES, d)))
                .collect(),
            negative_rngs: (0..graph.n_domains())
                .map(|d| indexed_stream(cfg.seed, streams::NEGATIVES, d))
                .collect(),
            dropout_rng: stream(cfg.seed, streams::DROPOUT),
            last_alpha: DomainWeights::uniform(graph.n_domains()),
            log: TrainLog::default(),
            params,
            optimizer,
            epoch: 0,
            step: 0,
            config: cfg,
        };
        Trainer::from_state(graph, state)
    }

    fn from_state(graph: &'g MultiGraph, state: TrainState) -> Result<Self> {
        let cfg = &state.config;
        let samplers = (0..graph.n_domains())
            .map(|d| NegativeSampler::new(graph, d, cfg.neg_distribution))
            .collect::<Result<Vec<_>>>()?;
        let pool = if cfg.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.threads)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Trainer {
            graph,
            ops: GraphOperators::new(graph),
            x0: FeatureMatrix::Identity(graph.n_nodes()),
            samplers,
            pool,
            state,
            elapsed: 0.0,
        })
    }

    /// Continues a run from a checkpoint taken on the same graph.
    pub fn resume(graph: &'g MultiGraph, ckpt: Checkpoint) -> Result<Self> {
        if ckpt.graph_fingerprint != graph.fingerprint() {
            return Err(Error::InvalidInput(
                "checkpoint was written for a different graph".into(),
            ));
        }
        validate_training_input(graph, &ckpt.state.config)?;
        if ckpt.state.params.n_domains() != graph.n_domains() || ckpt.state.params.dims().input != graph.n_nodes() {
            return Err(Error::Shape("checkpoint parameters do not fit the graph".into()));
        }
        Trainer::from_state(graph, ckpt.state)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            graph_fingerprint: self.graph.fingerprint(),
            state: self.state.clone(),
        }
    }

    pub fn graph(&self) -> &'g MultiGraph {
        self.graph
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn params(&self) -> &ModelParams {
        &self.state.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.state.config
    }

    pub fn log(&self) -> &TrainLog {
        &self.state.log
    }

    pub fn epochs_done(&self) -> usize {
        self.state.epoch
    }

    pub fn is_done(&self) -> bool {
        self.state.epoch >= self.state.config.epochs
    }

    /// Seconds spent in [`Trainer::run_epoch`] by this instance.
    pub fn elapsed_secs(&self) -> f64 {
        self.elapsed
    }

    pub fn steps_per_epoch(&self) -> usize {
        let largest = (0..self.graph.n_domains())
            .map(|d| self.graph.edges(d).len())
            .max()
            .unwrap_or(0);
        largest.div_ceil(self.state.config.batch_size)
    }

    fn largest_domain(&self) -> usize {
        // first domain with the most edges
        (0..self.graph.n_domains())
            .rev()
            .max_by_key(|&d| self.graph.edges(d).len())
            .unwrap_or(0)
    }

    fn draw_batches(&mut self) -> Result<Vec<SampleBatch>> {
        let batch_size = self.state.config.batch_size;
        let per_positive = self.state.config.negatives;
        let mut out = Vec::with_capacity(self.graph.n_domains());
        for d in 0..self.graph.n_domains() {
            let edges = self.graph.edges(d);
            let stream = &mut self.state.streams[d];
            let picked = stream.next_chunk(batch_size);
            let positives = picked
                .into_iter()
                .map(|k| {
                    let e = edges[k];
                    if stream.flip() {
                        (e.j, e.i)
                    } else {
                        (e.i, e.j)
                    }
                })
                .collect();
            out.push(SampleBatch::with_negatives(
                self.graph,
                d,
                positives,
                per_positive,
                &self.samplers[d],
                &mut self.state.negative_rngs[d],
            )?);
        }
        Ok(out)
    }

    /// One synchronized step across all domains.
    pub fn step(&mut self) -> Result<()> {
        let batches = self.draw_batches()?;
        let cfg = self.state.config.clone();
        let (emb, masks) = forward_all(
            &self.ops,
            &self.x0,
            &self.state.params,
            Some((cfg.dropout, &mut self.state.dropout_rng)),
        )?;
        let params = &self.state.params;
        let (ops, x0) = (&self.ops, &self.x0);
        let grad = |b: &SampleBatch| backward_from_forward(b, ops, x0, params, &masks, &emb);
        let bundles: Vec<GradientBundle> = match &self.pool {
            Some(pool) => pool.install(|| batches.par_iter().map(grad).collect::<Result<Vec<_>>>())?,
            None => batches.iter().map(grad).collect::<Result<Vec<_>>>()?,
        };
        for b in &bundles {
            if !b.is_finite() {
                return Err(Error::NonFinite {
                    step: self.state.step,
                    domain: b.domain,
                });
            }
        }

        let normalized: Option<Vec<Array2<f64>>> = bundles
            .iter()
            .map(|b| normalize_gradient(&b.grad_theta_s, b.loss))
            .collect();
        let weights = match cfg.alpha {
            AlphaMode::Fixed(a) => fixed_alpha_weights(a)?,
            AlphaMode::Mgda => match &normalized {
                Some(gs) => {
                    let flat: Vec<Vec<f64>> = gs.iter().map(|g| g.iter().copied().collect()).collect();
                    solve_alpha(&flat, cfg.frank_wolfe)?
                }
                // a degenerate domain gradient: keep the previous weights
                None => self.state.last_alpha.clone(),
            },
        };
        let direction = match (&normalized, cfg.step_on_normalized) {
            (Some(gs), true) => {
                let mut dir = Array2::zeros(self.state.params.theta_s.raw_dim());
                for (g, &a) in gs.iter().zip(weights.as_slice()) {
                    dir.scaled_add(a, g);
                }
                dir
            }
            _ => combine_shared(&bundles, &weights)?,
        };
        apply_updates_with_direction(&mut self.state.params, &bundles, &direction, &mut self.state.optimizer)?;
        if !self.state.params.is_finite() {
            return Err(Error::NonFinite {
                step: self.state.step,
                domain: 0,
            });
        }

        self.state.log.rows.push(LogRow {
            step: self.state.step,
            epoch: self.state.epoch,
            losses: bundles.iter().map(|b| b.loss).collect(),
            alphas: weights.as_slice().to_vec(),
        });
        self.state.last_alpha = weights;
        self.state.step += 1;
        Ok(())
    }

    pub fn run_epoch(&mut self) -> Result<()> {
        let start = Instant::now();
        let largest = self.largest_domain();
        let steps = self.steps_per_epoch();
        for _ in 0..steps {
            self.step()?;
        }
        debug_assert!(self.state.streams[largest].pos == self.state.streams[largest].order.len());
        self.state.epoch += 1;
        self.elapsed += start.elapsed().as_secs_f64();
        Ok(())
    }

    /// Runs the remaining epochs.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.run_epoch()?;
        }
        Ok(())
    }

    /// Evaluation-mode embeddings of the current parameters, tagged with the graph.
    pub fn embeddings(&self) -> Result<EmbeddingSet> {
        let (mut emb, _) = forward_all(&self.ops, &self.x0, &self.state.params, None)?;
        emb.provenance = Some(self.graph.fingerprint());
        Ok(emb)
    }
}

/// Trains to completion and returns parameters, evaluation-mode embeddings and the log.
pub fn train(g: &MultiGraph, cfg: TrainConfig) -> Result<(ModelParams, EmbeddingSet, TrainLog)> {
    let mut trainer = Trainer::new(g, cfg)?;
    trainer.run()?;
    let emb = trainer.embeddings()?;
    Ok((trainer.state.params, emb, trainer.state.log))
}
