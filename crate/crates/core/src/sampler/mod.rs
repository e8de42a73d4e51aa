//! Walker-centric random walks over logical machines in bulk-synchronous supersteps.
//!
//! Each machine owns the nodes its partition assigns to it and advances every
//! walker sitting on one of those nodes until the walker either stops or picks a
//! next hop owned by another machine. Then it serializes the walker into a
//! [`WalkerMessage`] addressed to that machine. Messages are delivered at the
//! superstep barrier. A round launches one walker from every node, and rounds
//! repeat until the corpus occurrence distribution stops moving (or a fixed count
//! is reached).
//!
//! Every random choice is drawn from a stream keyed by `(seed, walker, step)`, so
//! the corpus does not depend on the partition or on the number of machines.

mod corpus;
pub mod message;
mod strategy;

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{CsrGraph, NodeId};
use crate::partition::{MachineId, PartitionAssignment};
use crate::rng;
use crate::walk_stats::full_path::FullPathWalk;
use crate::walk_stats::{should_terminate, CorpusStats, LocalFrequencyList, WalkInfoState};

pub use corpus::{CommReport, Corpus, CorpusSummary, MachineComm};
pub use message::{Layout, Payload, WalkerMessage};
pub use strategy::{
    huge_acceptance, next_hop, node2vec_weight, StatsMode, Stopping, WalkKind, WalkStrategy, MAX_TRIALS,
};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid walk configuration: {0}")]
    Config(String),
    #[error("node2vec distance must be 0, 1 or 2, got {0}")]
    Distance(u8),
    #[error("malformed walker message: {0}")]
    Wire(String),
    #[error("corpus line {line}: {msg}")]
    Corpus { line: usize, msg: String },
    #[error("partition covers {parts} nodes but the graph has {graph}")]
    Partition { parts: usize, graph: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Statistics a walker carries, by stopping mode.
#[derive(Debug, Clone)]
enum WalkStats {
    Info(WalkInfoState),
    Path(FullPathWalk),
    Count(u32),
}

impl WalkStats {
    fn start(stopping: &Stopping, source: NodeId) -> Self {
        match stopping {
            Stopping::InformationCentric {
                mode: StatsMode::Incremental,
                ..
            } => WalkStats::Info(WalkInfoState::start()),
            Stopping::InformationCentric {
                mode: StatsMode::FullPath,
                ..
            } => WalkStats::Path(FullPathWalk::new(source)),
            Stopping::Fixed { .. } => WalkStats::Count(1),
        }
    }

    fn len(&self) -> u32 {
        match self {
            WalkStats::Info(s) => s.len,
            WalkStats::Path(w) => w.len() as u32,
            WalkStats::Count(n) => *n,
        }
    }

    /// Appends `v`, which occurred `n_before` times earlier in the walk.
    fn append(&mut self, v: NodeId, n_before: u32) {
        match self {
            WalkStats::Info(s) => s
                .advance(n_before as u64)
                .expect("local count never exceeds walk length"),
            WalkStats::Path(w) => w.push(v),
            WalkStats::Count(n) => *n += 1,
        }
    }

    fn finished(&self, stopping: &Stopping) -> bool {
        match (self, stopping) {
            (WalkStats::Info(s), Stopping::InformationCentric { rule, .. }) => should_terminate(s, rule),
            (WalkStats::Path(w), Stopping::InformationCentric { rule, .. }) => w.should_terminate(rule),
            (WalkStats::Count(n), Stopping::Fixed { length, .. }) => *n >= *length,
            _ => unreachable!("statistics always match the stopping mode"),
        }
    }

    fn payload(&self) -> Payload {
        match self {
            WalkStats::Info(s) => Payload::Info(*s),
            WalkStats::Path(w) => Payload::Path(w.path.clone()),
            WalkStats::Count(_) => Payload::Bare,
        }
    }

    fn from_payload(payload: Payload, steps: u64) -> Self {
        match payload {
            Payload::Info(s) => WalkStats::Info(s),
            Payload::Path(p) => WalkStats::Path(FullPathWalk::from_path(&p)),
            Payload::Bare => WalkStats::Count(steps as u32),
        }
    }

    fn needs_counts(&self) -> bool {
        matches!(self, WalkStats::Info(_))
    }
}

fn layout_of(stopping: &Stopping) -> Layout {
    match stopping {
        Stopping::InformationCentric {
            mode: StatsMode::Incremental,
            ..
        } => Layout::Info,
        Stopping::InformationCentric {
            mode: StatsMode::FullPath,
            ..
        } => Layout::Path,
        Stopping::Fixed { .. } => Layout::Bare,
    }
}

/// Random stream for choosing node number `len + 1` of walker `walker`.
fn step_rng(seed: u64, walker: u64, len: u32) -> ChaCha8Rng {
    rng::stream(rng::mix(seed, walker), len as u64)
}

struct ActiveWalk {
    id: u64,
    current: NodeId,
    prev: Option<NodeId>,
    stats: WalkStats,
}

enum Outcome {
    Done,
    Move(NodeId),
}

#[derive(Clone, Copy)]
struct Ctx<'a> {
    g: &'a CsrGraph,
    strategy: &'a WalkStrategy,
    seed: u64,
}

impl Ctx<'_> {
    /// Advances `walk` (whose current node is already recorded) while hops stay
    /// local, pushing appended nodes onto `frag`.
    fn drive(
        &self,
        walk: &mut ActiveWalk,
        freq: &mut LocalFrequencyList,
        frag: &mut Vec<NodeId>,
        is_local: impl Fn(NodeId) -> bool,
    ) -> Outcome {
        loop {
            if walk.stats.finished(&self.strategy.stopping) {
                return Outcome::Done;
            }
            let mut r = step_rng(self.seed, walk.id, walk.stats.len());
            let Some(v) = next_hop(self.g, self.strategy.kind, walk.current, walk.prev, &mut r) else {
                return Outcome::Done;
            };
            if !is_local(v) {
                return Outcome::Move(v);
            }
            walk.prev = Some(walk.current);
            self.arrive(walk, v, freq, frag);
        }
    }

    fn arrive(&self, walk: &mut ActiveWalk, v: NodeId, freq: &mut LocalFrequencyList, frag: &mut Vec<NodeId>) {
        let n_before = if walk.stats.needs_counts() { freq.bump(v) } else { 0 };
        walk.stats.append(v, n_before);
        walk.current = v;
        frag.push(v);
    }

    fn launch(&self, id: u64, source: NodeId, freq: &mut LocalFrequencyList) -> ActiveWalk {
        let stats = WalkStats::start(&self.strategy.stopping, source);
        if stats.needs_counts() {
            freq.bump(source);
        }
        ActiveWalk {
            id,
            current: source,
            prev: None,
            stats,
        }
    }
}

/// One walk computed on a single machine; the same path `run_walks` produces for
/// walker `walker_id` starting at `source`.
pub fn walk_from(g: &CsrGraph, strategy: &WalkStrategy, seed: u64, walker_id: u64, source: NodeId) -> Vec<NodeId> {
    let ctx = Ctx { g, strategy, seed };
    let mut freq = LocalFrequencyList::default();
    let mut path = vec![source];
    let mut walk = ctx.launch(walker_id, source, &mut freq);
    ctx.drive(&mut walk, &mut freq, &mut path, |_| true);
    path
}

struct Fragment {
    walker: u64,
    start: u32,
    nodes: Vec<NodeId>,
}

struct Machine {
    id: MachineId,
    freq: HashMap<u64, LocalFrequencyList>,
    fragments: Vec<Fragment>,
    outbox: Vec<Vec<u8>>,
    comm: MachineComm,
}

impl Machine {
    fn new(id: MachineId, m: usize) -> Self {
        Self {
            id,
            freq: HashMap::new(),
            fragments: Vec::new(),
            outbox: vec![Vec::new(); m],
            comm: MachineComm {
                machine_id: id,
                ..Default::default()
            },
        }
    }

    fn superstep(
        &mut self,
        ctx: Ctx<'_>,
        parts: &PartitionAssignment,
        launches: &[(u64, NodeId)],
        inbox: &[u8],
    ) -> Result<(), SamplerError> {
        let layout = layout_of(&ctx.strategy.stopping);
        let second_order = ctx.strategy.second_order();
        for &(id, source) in launches {
            let freq = self.freq.entry(id).or_default();
            let mut walk = ctx.launch(id, source, freq);
            let mut frag = vec![source];
            let out = ctx.drive(&mut walk, freq, &mut frag, |v| parts.owner_of(v) == self.id);
            self.finish(walk, 0, frag, out, parts, second_order);
        }
        for msg in message::decode_all(inbox, layout, second_order)? {
            let mut walk = ActiveWalk {
                id: msg.walker_id,
                current: msg.node_id,
                prev: msg.prev_node,
                stats: WalkStats::from_payload(msg.payload, msg.steps),
            };
            let start = walk.stats.len();
            let freq = self.freq.entry(walk.id).or_default();
            let mut frag = Vec::new();
            ctx.arrive(&mut walk, msg.node_id, freq, &mut frag);
            let out = ctx.drive(&mut walk, freq, &mut frag, |v| parts.owner_of(v) == self.id);
            self.finish(walk, start, frag, out, parts, second_order);
        }
        Ok(())
    }

    fn finish(
        &mut self,
        walk: ActiveWalk,
        start: u32,
        nodes: Vec<NodeId>,
        out: Outcome,
        parts: &PartitionAssignment,
        second_order: bool,
    ) {
        self.comm.local_steps += nodes.len() as u64;
        self.fragments.push(Fragment {
            walker: walk.id,
            start,
            nodes,
        });
        if let Outcome::Move(v) = out {
            let msg = WalkerMessage {
                walker_id: walk.id,
                steps: walk.stats.len() as u64,
                node_id: v,
                payload: walk.stats.payload(),
                prev_node: second_order.then_some(walk.current),
            };
            let buf = &mut self.outbox[parts.owner_of(v) as usize];
            let before = buf.len();
            msg.encode(buf);
            self.comm.msgs_sent += 1;
            self.comm.bytes_sent += (buf.len() - before) as u64;
        }
    }
}

/// Runs rounds of walks from every node over the machines of `parts`.
pub fn run_walks(
    g: &CsrGraph,
    parts: &PartitionAssignment,
    strategy: &WalkStrategy,
    seed: u64,
) -> Result<(Corpus, CommReport), SamplerError> {
    strategy.validate()?;
    let n = g.node_count();
    if parts.node_count() != n {
        return Err(SamplerError::Partition {
            parts: parts.node_count(),
            graph: n,
        });
    }
    let m = parts.m.max(1);
    let mut machines: Vec<Machine> = (0..m).map(|i| Machine::new(i as MachineId, m)).collect();
    let mut corpus = Corpus {
        stats: CorpusStats::new(n),
        ..Default::default()
    };
    let mut report = CommReport::default();
    if n == 0 {
        report.machines = machines.into_iter().map(|mc| mc.comm).collect();
        return Ok((corpus, report));
    }
    let ctx = Ctx { g, strategy, seed };
    let max_rounds = match strategy.stopping {
        Stopping::InformationCentric { max_rounds, .. } => max_rounds,
        Stopping::Fixed { walks_per_node, .. } => walks_per_node,
    };
    let mut owned: Vec<Vec<NodeId>> = vec![Vec::new(); m];
    for v in 0..n as NodeId {
        owned[parts.owner_of(v) as usize].push(v);
    }
    for round in 0..max_rounds {
        let base = (round * n) as u64;
        let mut inboxes: Vec<Vec<u8>> = vec![Vec::new(); m];
        let mut first = true;
        loop {
            report.supersteps += 1;
            machines
                .par_iter_mut()
                .zip(inboxes.par_iter())
                .map(|(mc, inbox)| {
                    let launches: Vec<(u64, NodeId)> = if first {
                        owned[mc.id as usize].iter().map(|&s| (base + s as u64, s)).collect()
                    } else {
                        Vec::new()
                    };
                    mc.superstep(ctx, parts, &launches, inbox)
                })
                .collect::<Result<Vec<()>, _>>()?;
            first = false;
            for inbox in inboxes.iter_mut() {
                inbox.clear();
            }
            let mut any = false;
            for mc in machines.iter_mut() {
                for (dest, buf) in mc.outbox.iter_mut().enumerate() {
                    any |= !buf.is_empty();
                    inboxes[dest].append(buf);
                }
            }
            if !any {
                break;
            }
        }
        let walks = assemble(&mut machines, base, n);
        for w in &walks {
            corpus.stats.add_walk(w);
        }
        corpus.walks.extend(walks);
        corpus.rounds = round + 1;
        if let Stopping::InformationCentric { delta, .. } = strategy.stopping {
            corpus.divergence.push(corpus.stats.record_round(g));
            if corpus.stats.converged(delta) {
                break;
            }
        }
    }
    report.machines = machines.into_iter().map(|mc| mc.comm).collect();
    Ok((corpus, report))
}

/// Joins the round's fragments by walker and clears per-walk frequency lists.
fn assemble(machines: &mut [Machine], base: u64, n: usize) -> Vec<Vec<NodeId>> {
    let mut frags: Vec<Fragment> = machines.iter_mut().flat_map(|mc| mc.fragments.drain(..)).collect();
    frags.sort_unstable_by_key(|f| (f.walker, f.start));
    let mut walks: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for f in frags {
        let w = &mut walks[(f.walker - base) as usize];
        debug_assert_eq!(w.len(), f.start as usize);
        w.extend(f.nodes);
    }
    for mc in machines.iter_mut() {
        mc.freq.clear();
    }
    walks
}
