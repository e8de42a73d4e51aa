//! End-to-end runs: configuration, the four stages, their artifacts and the
//! JSON run report.
//!
//! Every stage that needs the graph loads it and applies the same seeded edge
//! split, so stages can run separately or chained and see the same training
//! graph. All randomness derives from the one top-level seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::eval::{self, CommSummary, EvalError, EvalSummary, LinkSplit, TrialResult};
use crate::graph::{load_edge_list, CsrGraph, GraphError};
use crate::learner::{
    self, EmbeddingStore, Embeddings, LearnError, SyncMode, SyncSchedule, TrainConfig, TrainReport, VectorChoice,
};
use crate::partition::{
    partition_hash, partition_parallel, partition_stream, PartitionAssignment, PartitionError, StreamOrder,
};
use crate::rng::{self, stage};
use crate::sampler::{run_walks, CommReport, Corpus, SamplerError, StatsMode, Stopping, WalkKind, WalkStrategy};
use crate::walk_stats::TerminationRule;

pub const PARTITION_FILE: &str = "partition.txt";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const COMM_FILE: &str = "comm_report.csv";
pub const EMBEDDING_FILE: &str = "embeddings.txt";
pub const EVAL_FILE: &str = "eval.csv";
pub const REPORT_FILE: &str = "run_report.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("walk: {0}")]
    Sampler(#[from] SamplerError),
    #[error("train: {0}")]
    Learn(#[from] LearnError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    #[default]
    Huge,
    Deepwalk,
    Node2vec,
}

impl FromStr for StrategyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "huge" => Ok(Self::Huge),
            "deepwalk" => Ok(Self::Deepwalk),
            "node2vec" => Ok(Self::Node2vec),
            other => Err(format!("unknown strategy {other:?} (huge, deepwalk, node2vec)")),
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Huge => "huge",
            Self::Deepwalk => "deepwalk",
            Self::Node2vec => "node2vec",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionerName {
    #[default]
    Mpgp,
    Hash,
}

impl FromStr for PartitionerName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mpgp" => Ok(Self::Mpgp),
            "hash" => Ok(Self::Hash),
            other => Err(format!("unknown partitioner {other:?} (mpgp, hash)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub directed: bool,
    pub weighted: bool,
    pub machines: usize,
    pub gamma: f64,
    pub order: StreamOrder,
    /// Independent stream segments for parallel partitioning; 1 is sequential.
    pub segments: usize,
    pub partitioner: PartitionerName,
    pub strategy: StrategyName,
    pub p: f64,
    pub q: f64,
    /// Setting either fixed-walk field switches off information-centric stopping.
    pub fixed_length: Option<u32>,
    pub walks_per_node: Option<usize>,
    pub mu: f64,
    pub delta: f64,
    pub min_length: u32,
    pub max_length: u32,
    pub max_rounds: usize,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub multi_windows: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lr_min: f64,
    pub workers: usize,
    /// Wall-clock sync period in seconds.
    pub sync_interval: f64,
    /// Sync every this many lifetimes instead of on the wall clock.
    pub sync_lifetimes: Option<usize>,
    pub sync_mode: SyncMode,
    pub vectors: VectorChoice,
    /// Share of edges held out for link prediction; 0 trains on the whole graph.
    pub test_fraction: f64,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rule = TerminationRule::default();
        Self {
            graph: None,
            directed: false,
            weighted: false,
            machines: 4,
            gamma: 2.0,
            order: StreamOrder::DfsDegree,
            segments: 1,
            partitioner: PartitionerName::Mpgp,
            strategy: StrategyName::Huge,
            p: 1.0,
            q: 1.0,
            fixed_length: None,
            walks_per_node: None,
            mu: rule.mu,
            delta: 0.001,
            min_length: rule.min_len,
            max_length: rule.max_len,
            max_rounds: Stopping::DEFAULT_MAX_ROUNDS,
            dim: 128,
            window: 10,
            negatives: 5,
            multi_windows: 2,
            epochs: 1,
            lr: 0.025,
            lr_min: 0.0001,
            workers: 1,
            sync_interval: 0.1,
            sync_lifetimes: None,
            sync_mode: SyncMode::Hotness,
            vectors: VectorChoice::Input,
            test_fraction: 0.5,
            trials: 1,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, PipelineError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(config_err(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_with<T, E: fmt::Display>(key: &str, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| config_err(format!("{key}: {e}")))
}

impl RunConfig {
    /// Every key accepted by [`RunConfig::set`], spelled like the CLI flags.
    pub const KEYS: &'static [&'static str] = &[
        "graph",
        "directed",
        "weighted",
        "machines",
        "gamma",
        "order",
        "segments",
        "partitioner",
        "strategy",
        "p",
        "q",
        "fixed-length",
        "walks-per-node",
        "mu",
        "delta",
        "min-length",
        "max-length",
        "max-rounds",
        "dim",
        "window",
        "negatives",
        "multi-windows",
        "epochs",
        "lr",
        "lr-min",
        "workers",
        "sync-interval",
        "sync-lifetimes",
        "sync-mode",
        "vectors",
        "test-fraction",
        "trials",
        "seed",
        "out",
    ];

    /// Sets one key. Underscores and dashes are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let k = key.trim().replace('_', "-");
        let v = value.trim();
        match k.as_str() {
            "graph" => self.graph = Some(PathBuf::from(v)),
            "directed" => self.directed = parse_bool(&k, v)?,
            "weighted" => self.weighted = parse_bool(&k, v)?,
            "machines" => self.machines = parse(&k, v)?,
            "gamma" => self.gamma = parse(&k, v)?,
            "order" => self.order = parse_with(&k, v.parse())?,
            "segments" => self.segments = parse(&k, v)?,
            "partitioner" => self.partitioner = parse_with(&k, v.parse())?,
            "strategy" => self.strategy = parse_with(&k, v.parse())?,
            "p" => self.p = parse(&k, v)?,
            "q" => self.q = parse(&k, v)?,
            "fixed-length" => self.fixed_length = Some(parse(&k, v)?),
            "walks-per-node" => self.walks_per_node = Some(parse(&k, v)?),
            "mu" => self.mu = parse(&k, v)?,
            "delta" => self.delta = parse(&k, v)?,
            "min-length" => self.min_length = parse(&k, v)?,
            "max-length" => self.max_length = parse(&k, v)?,
            "max-rounds" => self.max_rounds = parse(&k, v)?,
            "dim" => self.dim = parse(&k, v)?,
            "window" => self.window = parse(&k, v)?,
            "negatives" => self.negatives = parse(&k, v)?,
            "multi-windows" => self.multi_windows = parse(&k, v)?,
            "epochs" => self.epochs = parse(&k, v)?,
            "lr" => self.lr = parse(&k, v)?,
            "lr-min" => self.lr_min = parse(&k, v)?,
            "workers" => self.workers = parse(&k, v)?,
            "sync-interval" => self.sync_interval = parse(&k, v)?,
            "sync-lifetimes" => self.sync_lifetimes = Some(parse(&k, v)?),
            "sync-mode" => {
                self.sync_mode = match v {
                    "hotness" => SyncMode::Hotness,
                    "full" => SyncMode::Full,
                    _ => return Err(config_err(format!("{k}: expected hotness or full, got {v:?}"))),
                }
            }
            "vectors" => {
                self.vectors = match v {
                    "input" => VectorChoice::Input,
                    "mean" => VectorChoice::Mean,
                    _ => return Err(config_err(format!("{k}: expected input or mean, got {v:?}"))),
                }
            }
            "test-fraction" => self.test_fraction = parse(&k, v)?,
            "trials" => self.trials = parse(&k, v)?,
            "seed" => self.seed = parse(&k, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(config_err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v).map_err(|e| config_err(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let mut cfg = Self::default();
        cfg.apply_text(&read_file(path.as_ref())?)?;
        Ok(cfg)
    }

    pub fn strategy(&self) -> WalkStrategy {
        let kind = match self.strategy {
            StrategyName::Huge => WalkKind::Huge,
            StrategyName::Deepwalk => WalkKind::DeepWalk,
            StrategyName::Node2vec => WalkKind::Node2Vec { p: self.p, q: self.q },
        };
        let stopping = if self.fixed_length.is_some() || self.walks_per_node.is_some() {
            Stopping::Fixed {
                length: self.fixed_length.unwrap_or(self.max_length),
                walks_per_node: self.walks_per_node.unwrap_or(10),
            }
        } else {
            Stopping::InformationCentric {
                rule: TerminationRule {
                    mu: self.mu,
                    min_len: self.min_length,
                    max_len: self.max_length,
                },
                delta: self.delta,
                max_rounds: self.max_rounds,
                mode: StatsMode::Incremental,
            }
        };
        WalkStrategy { kind, stopping }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            window_count: self.multi_windows,
            epochs: self.epochs,
            lr: self.lr,
            lr_min: self.lr_min,
            machines: self.machines,
            workers: self.workers,
            sync: match self.sync_lifetimes {
                Some(n) => SyncSchedule::Lifetimes(n),
                None => SyncSchedule::Wall(Duration::from_secs_f64(self.sync_interval.max(0.0))),
            },
            sync_mode: self.sync_mode,
            seed: rng::mix(self.seed, stage::TRAIN),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.machines == 0 {
            return Err(config_err("machines must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(config_err(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.segments == 0 {
            return Err(config_err("segments must be at least 1"));
        }
        if !(self.mu >= 0.0 && self.mu <= 1.0) {
            return Err(config_err(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if !(self.sync_interval > 0.0 && self.sync_interval.is_finite()) {
            return Err(config_err(format!(
                "sync-interval must be positive, got {}",
                self.sync_interval
            )));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(config_err(format!(
                "test-fraction must lie in [0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        self.strategy().validate().map_err(|e| config_err(e.to_string()))?;
        self.train_config().validate().map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    /// Where artifact `name` lives under the output directory.
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_graph(cfg: &RunConfig) -> Result<CsrGraph, PipelineError> {
    let path = cfg.graph.as_ref().ok_or_else(|| config_err("no graph given"))?;
    if !path.exists() {
        return Err(PipelineError::File {
            path: path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "graph file not found"),
        });
    }
    Ok(load_edge_list(path, cfg.directed, cfg.weighted)?)
}

/// The training graph and the held-out test pairs under `cfg.seed`.
pub fn prepare(cfg: &RunConfig, g: &CsrGraph) -> Result<LinkSplit, PipelineError> {
    if cfg.test_fraction == 0.0 {
        return Ok(LinkSplit {
            train_graph: g.clone(),
            pos_test: Vec::new(),
            neg_test: Vec::new(),
            split_seed: cfg.seed,
        });
    }
    Ok(eval::split_edges(g, cfg.test_fraction, cfg.seed)?)
}

pub fn partition(cfg: &RunConfig, g: &CsrGraph) -> PartitionAssignment {
    let seed = rng::mix(cfg.seed, stage::PARTITION);
    match cfg.partitioner {
        PartitionerName::Hash => partition_hash(g, cfg.machines),
        PartitionerName::Mpgp if cfg.segments > 1 => {
            partition_parallel(g, cfg.machines, cfg.gamma, cfg.segments, cfg.order, seed)
        }
        PartitionerName::Mpgp => partition_stream(g, cfg.machines, cfg.gamma, cfg.order, seed),
    }
}

pub fn walk(cfg: &RunConfig, g: &CsrGraph, parts: &PartitionAssignment) -> Result<(Corpus, CommReport), PipelineError> {
    Ok(run_walks(g, parts, &cfg.strategy(), rng::mix(cfg.seed, stage::WALK))?)
}

pub fn train(cfg: &RunConfig, corpus: &Corpus) -> Result<(EmbeddingStore, TrainReport), PipelineError> {
    Ok(learner::train(corpus, &cfg.train_config())?)
}

pub fn evaluate(emb: &Embeddings, split: &LinkSplit) -> Result<f64, PipelineError> {
    if split.pos_test.is_empty() {
        return Err(config_err("no held-out edges to evaluate; set test-fraction above 0"));
    }
    Ok(eval::auc_score(emb, split)?)
}

/// Everything one in-memory run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub split: LinkSplit,
    pub partition: PartitionAssignment,
    pub corpus: Corpus,
    pub comm: CommReport,
    pub embeddings: Embeddings,
    pub train: TrainReport,
    pub auc: Option<f64>,
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    /// Seconds from the start of the run to the start of the stage.
    pub offset: f64,
    pub seconds: f64,
}

struct Clock {
    start: Instant,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            timings: Vec::new(),
        }
    }

    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage,
            offset: t.duration_since(self.start).as_secs_f64(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Runs all stages on `g` without touching the file system.
pub fn run_on_graph(cfg: &RunConfig, g: &CsrGraph) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let mut clock = Clock::new();
    let split = clock.time("split", || prepare(cfg, g))?;
    let parts = clock.time("partition", || partition(cfg, &split.train_graph));
    let (corpus, comm) = clock.time("walk", || walk(cfg, &split.train_graph, &parts))?;
    let (store, train_report) = clock.time("train", || train(cfg, &corpus))?;
    let embeddings = store.export(cfg.vectors);
    let auc = if split.pos_test.is_empty() {
        None
    } else {
        Some(clock.time("eval", || evaluate(&embeddings, &split))?)
    };
    Ok(RunOutcome {
        split,
        partition: parts,
        corpus,
        comm,
        embeddings,
        train: train_report,
        auc,
        timings: clock.timings,
    })
}

/// Link-prediction AUC over `cfg.trials` independent seeds, starting at `cfg.seed`.
pub fn repeat(cfg: &RunConfig, g: &CsrGraph) -> Result<EvalSummary, PipelineError> {
    let seeds = eval::trial_seeds(cfg.seed, cfg.trials);
    eval::repeat_eval(&seeds, |seed| {
        let trial = RunConfig { seed, ..cfg.clone() };
        run_on_graph(&trial, g)?
            .auc
            .ok_or_else(|| config_err("test-fraction is 0; nothing to evaluate"))
    })
}

fn partition_json(p: &PartitionAssignment, g: &CsrGraph) -> Value {
    json!({
        "machines": p.m,
        "gamma": p.gamma,
        "order": p.order.map(|o| o.to_string()),
        "segments": p.segments,
        "sizes": p.sizes,
        "max_size": p.max_size(),
        "min_size": p.min_size(),
        "edge_cut": p.edge_cut(g),
    })
}

fn walk_json(corpus: &Corpus, comm: &CommReport) -> Value {
    json!({
        "corpus": corpus.summary(),
        "comm": CommSummary::of(comm),
    })
}

fn train_json(report: &TrainReport) -> Value {
    json!({
        "epochs": report.epochs,
        "node_count": report.node_count,
        "hotness_blocks": report.block_count,
        "ocn_max": report.ocn_max,
        "sync_periods": report.sync_periods(),
        "bytes_synced": report.bytes_synced(),
        "full_sync_bytes_per_period": report.full_sync_bytes,
        "final_loss": report.final_loss(),
    })
}

fn eval_json(summary: &EvalSummary, split: &LinkSplit) -> Value {
    json!({
        "pos_test": split.pos_test.len(),
        "neg_test": split.neg_test.len(),
        "auc_mean": summary.mean,
        "auc_std": summary.std,
        "trials": summary.trials,
    })
}

/// Merges `sections` into the run report in `cfg.out`, keeping sections
/// written by earlier stages unless `fresh`.
fn write_report(
    cfg: &RunConfig,
    sections: Vec<(&str, Value)>,
    timings: &[StageTiming],
    fresh: bool,
) -> Result<(), PipelineError> {
    let path = cfg.path(REPORT_FILE);
    let mut report: Map<String, Value> = if fresh {
        Map::new()
    } else {
        fs::read_to_string(&path)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default()
    };
    report.insert("config".into(), serde_json::to_value(cfg)?);
    let stages = report.entry("stages").or_insert_with(|| Value::Object(Map::new()));
    if let Value::Object(stages) = stages {
        for t in timings {
            stages.insert(t.stage.into(), json!({ "offset": t.offset, "seconds": t.seconds }));
        }
    }
    for (k, v) in sections {
        report.insert(k.into(), v);
    }
    fs::write(&path, serde_json::to_string_pretty(&Value::Object(report))? + "\n").map_err(file_err(&path))?;
    Ok(())
}

fn ensure_out(cfg: &RunConfig) -> Result<(), PipelineError> {
    fs::create_dir_all(&cfg.out).map_err(file_err(&cfg.out))
}

fn staged(cfg: &RunConfig) -> Result<(CsrGraph, LinkSplit, Clock), PipelineError> {
    cfg.validate()?;
    ensure_out(cfg)?;
    let mut clock = Clock::new();
    let g = clock.time("load", || load_graph(cfg))?;
    let split = clock.time("split", || prepare(cfg, &g))?;
    Ok((g, split, clock))
}

fn need(path: PathBuf, stage: &str) -> Result<PathBuf, PipelineError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::File {
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("missing; run the {stage} stage first"),
            ),
            path,
        })
    }
}

/// Writes the partition file.
pub fn cmd_partition(cfg: &RunConfig) -> Result<PartitionAssignment, PipelineError> {
    let (_, split, mut clock) = staged(cfg)?;
    let g = &split.train_graph;
    let parts = clock.time("partition", || partition(cfg, g));
    let path = cfg.path(PARTITION_FILE);
    parts.save(&path).map_err(file_err(&path))?;
    write_report(
        cfg,
        vec![("partition", partition_json(&parts, g))],
        &clock.timings,
        false,
    )?;
    Ok(parts)
}

/// Reads the partition file and writes the corpus and communication report.
pub fn cmd_walk(cfg: &RunConfig) -> Result<(Corpus, CommReport), PipelineError> {
    let (_, split, mut clock) = staged(cfg)?;
    let g = &split.train_graph;
    let parts = PartitionAssignment::load(need(cfg.path(PARTITION_FILE), "partition")?, Some(cfg.machines))?;
    parts.check_covers(g)?;
    let (corpus, comm) = clock.time("walk", || walk(cfg, g, &parts))?;
    let path = cfg.path(CORPUS_FILE);
    corpus.save(&path).map_err(file_err(&path))?;
    let path = cfg.path(COMM_FILE);
    comm.save_csv(&path).map_err(file_err(&path))?;
    write_report(cfg, vec![("walk", walk_json(&corpus, &comm))], &clock.timings, false)?;
    Ok((corpus, comm))
}

/// Reads the corpus and writes embeddings and the training log.
pub fn cmd_train(cfg: &RunConfig) -> Result<(Embeddings, TrainReport), PipelineError> {
    let (g, _, mut clock) = staged(cfg)?;
    let corpus = Corpus::load(need(cfg.path(CORPUS_FILE), "walk")?, g.node_count())?;
    let (store, report) = clock.time("train", || train(cfg, &corpus))?;
    let emb = store.export(cfg.vectors);
    let path = cfg.path(EMBEDDING_FILE);
    emb.save(&path).map_err(file_err(&path))?;
    let path = cfg.path(TRAIN_LOG_FILE);
    report.save_csv(&path).map_err(file_err(&path))?;
    write_report(cfg, vec![("train", train_json(&report))], &clock.timings, false)?;
    Ok((emb, report))
}

/// Scores the held-out split with the saved embeddings.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalSummary, PipelineError> {
    let (_, split, mut clock) = staged(cfg)?;
    let emb = Embeddings::load(need(cfg.path(EMBEDDING_FILE), "train")?)?;
    let auc = clock.time("eval", || evaluate(&emb, &split))?;
    let summary = EvalSummary::from_trials(vec![TrialResult {
        trial: 0,
        seed: cfg.seed,
        auc,
    }])?;
    let path = cfg.path(EVAL_FILE);
    summary.save_csv(&path).map_err(file_err(&path))?;
    write_report(cfg, vec![("eval", eval_json(&summary, &split))], &clock.timings, false)?;
    Ok(summary)
}

type Saver<'a> = Box<dyn Fn(&Path) -> std::io::Result<()> + 'a>;

/// Runs every stage, writes every artifact, and with `trials > 1` repeats the
/// whole run on further seeds for the evaluation summary.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<(RunOutcome, Option<EvalSummary>), PipelineError> {
    cfg.validate()?;
    ensure_out(cfg)?;
    let g = load_graph(cfg)?;
    let outcome = run_on_graph(cfg, &g)?;
    let tg = &outcome.split.train_graph;
    let files: [(&str, Saver); 4] = [
        (PARTITION_FILE, Box::new(|p| outcome.partition.save(p))),
        (CORPUS_FILE, Box::new(|p| outcome.corpus.save(p))),
        (COMM_FILE, Box::new(|p| outcome.comm.save_csv(p))),
        (EMBEDDING_FILE, Box::new(|p| outcome.embeddings.save(p))),
    ];
    for (name, save) in files {
        let path = cfg.path(name);
        save(&path).map_err(file_err(&path))?;
    }
    let path = cfg.path(TRAIN_LOG_FILE);
    outcome.train.save_csv(&path).map_err(file_err(&path))?;
    let mut sections = vec![
        ("partition", partition_json(&outcome.partition, tg)),
        ("walk", walk_json(&outcome.corpus, &outcome.comm)),
        ("train", train_json(&outcome.train)),
    ];
    let summary = match outcome.auc {
        Some(auc) => {
            let mut trials = vec![TrialResult {
                trial: 0,
                seed: cfg.seed,
                auc,
            }];
            if cfg.trials > 1 {
                let rest = eval::trial_seeds(cfg.seed, cfg.trials)[1..].to_vec();
                let more = eval::repeat_eval(&rest, |seed| {
                    let trial = RunConfig { seed, ..cfg.clone() };
                    run_on_graph(&trial, &g)?
                        .auc
                        .ok_or_else(|| config_err("nothing to evaluate"))
                })?;
                trials.extend(
                    more.trials
                        .into_iter()
                        .enumerate()
                        .map(|(i, t)| TrialResult { trial: i + 1, ..t }),
                );
            }
            let summary = EvalSummary::from_trials(trials)?;
            let path = cfg.path(EVAL_FILE);
            summary.save_csv(&path).map_err(file_err(&path))?;
            sections.push(("eval", eval_json(&summary, &outcome.split)));
            Some(summary)
        }
        None => None,
    };
    write_report(cfg, sections, &outcome.timings, true)?;
    Ok((outcome, summary))
}
