//! Parallel Skip-Gram training over logical machines.
//!
//! The corpus is split into contiguous slices, one per machine, and each
//! machine's slice again across its workers. A worker consumes its walks
//! `window_count` at a time (one lifetime), training them in lockstep with
//! shared negatives through private buffers. Machines keep separate stores and
//! exchange one row per hotness block at every synchronization period. At the
//! end every machine's matrices are averaged into the returned store.

mod batch;
mod sgns;
mod store;
mod sync;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::NodeId;
use crate::rng;
use crate::sampler::Corpus;

pub use batch::{train_multiwindow, LifetimeStats, NegativeSampler, WorkerBuffers};
pub use sgns::{log_sigmoid, pair_gradient, pair_log_likelihood, sgns_pair_update, sigmoid, PairGradient};
pub use store::{frequency_order, EmbeddingStore, Embeddings, HotnessBlock, SharedMatrix, VectorChoice};
pub use sync::{merge_average, sync_full, sync_hotness, sync_rows, SyncCost, SyncMode};

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("corpus has no walks")]
    EmptyCorpus,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("machine stores disagree on row ordering")]
    Mismatch,
    #[error("embedding file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// When machines exchange hotness-block rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncSchedule {
    /// After every worker has run this many lifetimes. Reproducible when each
    /// machine has a single worker.
    Lifetimes(usize),
    /// A coordinator thread syncs on a wall-clock period.
    Wall(Duration),
}

impl Default for SyncSchedule {
    fn default() -> Self {
        Self::Wall(Duration::from_millis(100))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub dim: usize,
    /// Context radius.
    pub window: usize,
    /// Shared negatives per step.
    pub negatives: usize,
    /// Walks trained together in one lifetime.
    pub window_count: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lr_min: f64,
    pub machines: usize,
    pub workers: usize,
    pub sync: SyncSchedule,
    pub sync_mode: SyncMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 10,
            negatives: 5,
            window_count: 2,
            epochs: 1,
            lr: 0.025,
            lr_min: 0.0001,
            machines: 1,
            workers: 1,
            sync: SyncSchedule::default(),
            sync_mode: SyncMode::Hotness,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: &str| Err(LearnError::Config(msg.into()));
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        if self.window == 0 || self.negatives == 0 || self.window_count == 0 {
            return bad("window, negatives and window count must be at least 1");
        }
        if self.epochs == 0 || self.machines == 0 || self.workers == 0 {
            return bad("epochs, machines and workers must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            return bad("learning rates must satisfy 0 <= lr_min <= lr and lr > 0");
        }
        match self.sync {
            SyncSchedule::Lifetimes(0) => bad("sync period must be at least one lifetime"),
            SyncSchedule::Wall(d) if d.is_zero() => bad("sync period must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean negative log-likelihood per (context, target) pair seen in training.
    pub loss: f64,
    /// Same quantity on held-out walks, when provided.
    pub holdout_loss: Option<f64>,
    pub nodes_per_sec: f64,
    pub sync_periods: u64,
    pub synced_rows: u64,
    pub bytes_synced: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub node_count: usize,
    pub block_count: usize,
    pub ocn_max: u64,
    /// What one full-sync period would move: `node_count·d·8·m`.
    pub full_sync_bytes: u64,
}

impl TrainReport {
    pub fn sync_periods(&self) -> u64 {
        self.epochs.iter().map(|e| e.sync_periods).sum()
    }

    pub fn bytes_synced(&self) -> u64 {
        self.epochs.iter().map(|e| e.bytes_synced).sum()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "epoch,loss,holdout_loss,nodes_per_sec,sync_periods,synced_rows,bytes_synced"
        )?;
        for e in &self.epochs {
            let holdout = e.holdout_loss.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{:.1},{},{},{}",
                e.epoch, e.loss, holdout, e.nodes_per_sec, e.sync_periods, e.synced_rows, e.bytes_synced
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()
    }
}

fn split(range: Range<usize>, parts: usize, i: usize) -> Range<usize> {
    let n = range.len();
    range.start + i * n / parts..range.start + (i + 1) * n / parts
}

fn worker_rng(seed: u64, machine: usize, worker: usize, epoch: usize) -> ChaCha8Rng {
    rng::stream(rng::mix(rng::mix(seed, machine as u64), worker as u64), epoch as u64)
}

struct Worker {
    machine: usize,
    index: usize,
    walks: Range<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    /// Nodes processed over all epochs, for the learning-rate schedule.
    done: u64,
    total: u64,
    loss: f64,
    pairs: u64,
    nodes: u64,
}

struct Shared<'a> {
    walks: &'a [Vec<NodeId>],
    stores: &'a [EmbeddingStore],
    sampler: &'a NegativeSampler,
    cfg: &'a TrainConfig,
}

impl Worker {
    fn reset(&mut self, seed: u64, epoch: usize) {
        self.cursor = self.walks.start;
        self.rng = worker_rng(seed, self.machine, self.index, epoch);
        self.loss = 0.0;
        self.pairs = 0;
        self.nodes = 0;
    }

    fn finished(&self) -> bool {
        self.cursor >= self.walks.end
    }

    fn lr(&self, cfg: &TrainConfig) -> f64 {
        let progress = self.done as f64 / self.total.max(1) as f64;
        (cfg.lr - (cfg.lr - cfg.lr_min) * progress).max(cfg.lr_min)
    }

    /// Runs one lifetime. Returns false once the worker's slice is exhausted.
    fn step(&mut self, sh: &Shared<'_>) -> bool {
        if self.finished() {
            return false;
        }
        let end = (self.cursor + sh.cfg.window_count).min(self.walks.end);
        let batch: Vec<&[NodeId]> = sh.walks[self.cursor..end].iter().map(Vec::as_slice).collect();
        self.cursor = end;
        let longest = batch.iter().map(|w| w.len()).max().unwrap_or(0);
        let nodes: u64 = batch.iter().map(|w| w.len() as u64).sum();
        let negatives = sh.sampler.sample_negatives(sh.cfg.negatives, longest, &mut self.rng);
        let lr = self.lr(sh.cfg);
        let stats = train_multiwindow(
            &sh.stores[self.machine],
            &batch,
            &negatives,
            sh.cfg.negatives,
            sh.cfg.window,
            lr,
        );
        self.loss += stats.loss;
        self.pairs += stats.pairs;
        self.nodes += nodes;
        self.done += nodes;
        true
    }
}

fn sync_once(stores: &[EmbeddingStore], mode: SyncMode, rng: &mut ChaCha8Rng) -> SyncCost {
    let cost = match mode {
        SyncMode::Hotness => sync_hotness(stores, rng),
        SyncMode::Full => sync_full(stores),
    };
    cost.expect("machine stores are clones of one layout")
}

/// Trains embeddings on the corpus.
pub fn train(corpus: &Corpus, cfg: &TrainConfig) -> Result<(EmbeddingStore, TrainReport), LearnError> {
    train_monitored(corpus, cfg, &[])
}

/// Like [`train`], also scoring `holdout` walks after every epoch.
pub fn train_monitored(
    corpus: &Corpus,
    cfg: &TrainConfig,
    holdout: &[Vec<NodeId>],
) -> Result<(EmbeddingStore, TrainReport), LearnError> {
    cfg.validate()?;
    if corpus.walks.is_empty() || corpus.stats.total_ocn == 0 {
        return Err(LearnError::EmptyCorpus);
    }
    let base = EmbeddingStore::build(&corpus.stats, cfg.dim, rng::mix(cfg.seed, 0))?;
    let stores: Vec<EmbeddingStore> = (0..cfg.machines).map(|_| base.clone()).collect();
    drop(base);
    let sampler = NegativeSampler::new(&corpus.stats.ocn)?;
    let sh = Shared {
        walks: &corpus.walks,
        stores: &stores,
        sampler: &sampler,
        cfg,
    };

    let all = 0..corpus.walks.len();
    let mut workers: Vec<Worker> = Vec::with_capacity(cfg.machines * cfg.workers);
    for m in 0..cfg.machines {
        let slice = split(all.clone(), cfg.machines, m);
        for i in 0..cfg.workers {
            let walks = split(slice.clone(), cfg.workers, i);
            let per_epoch: u64 = corpus.walks[walks.clone()].iter().map(|w| w.len() as u64).sum();
            workers.push(Worker {
                machine: m,
                index: i,
                cursor: walks.start,
                walks,
                rng: worker_rng(cfg.seed, m, i, 0),
                done: 0,
                total: per_epoch * cfg.epochs as u64,
                loss: 0.0,
                pairs: 0,
                nodes: 0,
            });
        }
    }

    let mut sync_rng = rng::stream(cfg.seed, u64::MAX);
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        workers.iter_mut().for_each(|w| w.reset(cfg.seed, epoch));
        let start = Instant::now();
        let mut cost = SyncCost::default();
        let mut periods = 0u64;
        match cfg.sync {
            SyncSchedule::Lifetimes(n) => loop {
                let active = workers
                    .par_iter_mut()
                    .map(|w| {
                        let mut ran = false;
                        for _ in 0..n {
                            ran |= w.step(&sh);
                        }
                        ran
                    })
                    .reduce(|| false, |a, b| a || b);
                if !active {
                    break;
                }
                if cfg.machines > 1 {
                    cost += sync_once(&stores, cfg.sync_mode, &mut sync_rng);
                    periods += 1;
                }
            },
            SyncSchedule::Wall(period) => {
                // Plain threads, not the rayon pool: the coordinator may itself
                // be running on the pool's only thread.
                let running = AtomicUsize::new(workers.len());
                std::thread::scope(|s| {
                    for w in workers.iter_mut() {
                        let (sh, running) = (&sh, &running);
                        s.spawn(move || {
                            while w.step(sh) {}
                            running.fetch_sub(1, Ordering::Release);
                        });
                    }
                    let poll = period.min(Duration::from_millis(5));
                    let mut next = Instant::now() + period;
                    while running.load(Ordering::Acquire) > 0 {
                        std::thread::sleep(poll.min(next.saturating_duration_since(Instant::now())));
                        if Instant::now() >= next && cfg.machines > 1 {
                            cost += sync_once(&stores, cfg.sync_mode, &mut sync_rng);
                            periods += 1;
                            next += period;
                        }
                    }
                });
            }
        }
        let seconds = start.elapsed().as_secs_f64();
        let (loss, pairs, nodes) = workers
            .iter()
            .fold((0.0, 0u64, 0u64), |(l, p, n), w| (l + w.loss, p + w.pairs, n + w.nodes));
        let holdout_loss = if holdout.is_empty() {
            None
        } else {
            let merged = merge_average(&stores)?;
            Some(evaluate_loss(&merged, holdout, cfg.window, cfg.negatives, cfg.seed))
        };
        logs.push(EpochLog {
            epoch,
            loss: if pairs > 0 { loss / pairs as f64 } else { f64::NAN },
            holdout_loss,
            nodes_per_sec: nodes as f64 / seconds.max(1e-9),
            sync_periods: periods,
            synced_rows: cost.rows,
            bytes_synced: cost.bytes,
            seconds,
        });
    }

    let merged = merge_average(&stores)?;
    let report = TrainReport {
        epochs: logs,
        node_count: merged.node_count(),
        block_count: merged.hot_blocks().count(),
        ocn_max: corpus.stats.ocn.iter().copied().max().unwrap_or(0),
        full_sync_bytes: (merged.node_count() * cfg.dim * 8 * cfg.machines) as u64,
    };
    Ok((merged, report))
}

/// Mean negative log-likelihood per (context, target) pair over `walks`, with
/// `k` negatives drawn per window from the store's frequencies. The draw is
/// seeded, so scores from different stores over the same walks are comparable.
pub fn evaluate_loss(store: &EmbeddingStore, walks: &[Vec<NodeId>], w: usize, k: usize, seed: u64) -> f64 {
    let mut ocn = vec![0u64; store.node_count()];
    for (row, &v) in store.order.iter().enumerate() {
        ocn[v as usize] = store.freq[row];
    }
    let Ok(sampler) = NegativeSampler::new(&ocn) else {
        return f64::NAN;
    };
    let mut rng = rng::stream(seed, rng::stage::EVAL);
    let (mut total, mut pairs) = (0.0, 0u64);
    for walk in walks {
        for (t, &target) in walk.iter().enumerate() {
            let lo = t.saturating_sub(w);
            let hi = (t + w).min(walk.len() - 1);
            if lo == hi {
                continue;
            }
            let negs: Vec<Vec<f64>> = (0..k)
                .map(|_| sampler.sample(&mut rng))
                .filter(|&n| n != target)
                .map(|n| store.output_vector(n))
                .collect();
            let nrefs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            let tv = store.output_vector(target);
            for (j, &c) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                if j != t {
                    total -= pair_log_likelihood(&store.input_vector(c), &tv, &nrefs);
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 {
        f64::NAN
    } else {
        total / pairs as f64
    }
}
