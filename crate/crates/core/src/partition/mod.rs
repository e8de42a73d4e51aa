//! Multi-proximity-aware streaming partitioning.
//!
//! Nodes arrive one at a time and go to the partition maximizing
//! `(PS1 + PS2) · τ`, where `PS1` counts (or weighs) the node's neighbors already
//! in the partition, `PS2` sums the common-neighbor counts with those neighbors,
//! and `τ = 1 − |P_i| / (γ · Σ|P| / m)` penalizes partitions past the slack `γ`.
//! Ties (including the all-zero case) go to the least-loaded partition, then the
//! lowest index.

mod members;
mod order;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{CsrGraph, NodeId};

pub use members::PartitionMembers;
pub use order::{stream_order, StreamOrder};

pub type MachineId = u32;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("partition file does not cover node {0}")]
    Missing(NodeId),
    #[error("partition file covers {file} nodes but the graph has {graph}")]
    SizeMismatch { file: usize, graph: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Node-to-machine assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionAssignment {
    pub owner: Vec<MachineId>,
    pub sizes: Vec<usize>,
    pub m: usize,
    pub gamma: f64,
    pub order: Option<StreamOrder>,
    pub segments: usize,
}

impl PartitionAssignment {
    pub fn from_owner(owner: Vec<MachineId>, m: usize) -> Self {
        let mut sizes = vec![0; m];
        for &o in &owner {
            sizes[o as usize] += 1;
        }
        Self {
            owner,
            sizes,
            m,
            gamma: 1.0,
            order: None,
            segments: 1,
        }
    }

    #[inline]
    pub fn owner_of(&self, v: NodeId) -> MachineId {
        self.owner[v as usize]
    }

    pub fn node_count(&self) -> usize {
        self.owner.len()
    }

    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn min_size(&self) -> usize {
        self.sizes.iter().copied().min().unwrap_or(0)
    }

    /// Edges whose endpoints live on different machines (undirected edges once).
    pub fn edge_cut(&self, g: &CsrGraph) -> usize {
        g.edges()
            .filter(|&(u, v, _)| self.owner_of(u) != self.owner_of(v))
            .count()
    }

    /// One `node_id machine_id` line per node.
    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        for (v, o) in self.owner.iter().enumerate() {
            writeln!(out, "{v} {o}")?;
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        self.write(File::create(path)?)
    }

    /// Reads a partition file; `m` is one past the largest machine id unless given.
    pub fn read<R: BufRead>(input: R, m: Option<usize>) -> Result<Self, PartitionError> {
        let mut pairs: Vec<(NodeId, MachineId)> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| PartitionError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let mut cols = body.split_whitespace();
            let v = cols
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("invalid node id"))?;
            let o = cols
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("invalid machine id"))?;
            pairs.push((v, o));
        }
        let n = pairs.iter().map(|p| p.0 as usize + 1).max().unwrap_or(0);
        let mut owner = vec![MachineId::MAX; n];
        for (v, o) in pairs {
            owner[v as usize] = o;
        }
        if let Some(v) = owner.iter().position(|&o| o == MachineId::MAX) {
            return Err(PartitionError::Missing(v as NodeId));
        }
        let max_m = owner.iter().map(|&o| o as usize + 1).max().unwrap_or(1);
        let m = m.unwrap_or(max_m).max(max_m);
        Ok(Self::from_owner(owner, m))
    }

    pub fn load(path: impl AsRef<Path>, m: Option<usize>) -> Result<Self, PartitionError> {
        Self::read(BufReader::new(File::open(path)?), m)
    }

    pub fn check_covers(&self, g: &CsrGraph) -> Result<(), PartitionError> {
        if self.node_count() != g.node_count() {
            return Err(PartitionError::SizeMismatch {
                file: self.node_count(),
                graph: g.node_count(),
            });
        }
        Ok(())
    }
}

/// `τ(P_i)`; 1 for every partition while nothing is assigned.
pub fn balance_factor(sizes: &[usize], i: usize, gamma: f64) -> f64 {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return 1.0;
    }
    let cap = gamma * total as f64 / sizes.len() as f64;
    1.0 - sizes[i] as f64 / cap
}

/// First-order proximity: neighbors of `v` in the partition (weight sum if weighted).
pub fn proximity_first(g: &CsrGraph, v: NodeId, part: &PartitionMembers) -> f64 {
    let mut s = 0.0;
    part.for_each_common(g.neighbors(v), |u| s += weight(g, v, u));
    s
}

/// Second-order proximity over the partition members adjacent to `v`:
/// `Σ |N(v) ∩ N(u)|` (times `w(v, u)` if weighted).
pub fn proximity_second(g: &CsrGraph, v: NodeId, part: &PartitionMembers) -> f64 {
    let mut s = 0.0;
    part.for_each_common(g.neighbors(v), |u| {
        s += g.common_neighbors_unchecked(v, u) as f64 * weight(g, v, u);
    });
    s
}

#[inline]
fn weight(g: &CsrGraph, v: NodeId, u: NodeId) -> f64 {
    if g.is_weighted() {
        g.edge_weight(v, u).unwrap_or(0.0)
    } else {
        1.0
    }
}

/// In-progress streaming state.
#[derive(Debug)]
pub struct StreamingPartitioner<'g> {
    g: &'g CsrGraph,
    gamma: f64,
    members: Vec<PartitionMembers>,
    sizes: Vec<usize>,
    scores: Vec<f64>,
}

impl<'g> StreamingPartitioner<'g> {
    pub fn new(g: &'g CsrGraph, m: usize, gamma: f64) -> Self {
        assert!(m >= 1, "need at least one partition");
        Self {
            g,
            gamma,
            members: vec![PartitionMembers::new(); m],
            sizes: vec![0; m],
            scores: vec![0.0; m],
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn members(&self, i: usize) -> &PartitionMembers {
        &self.members[i]
    }

    /// Scores of `v` against every partition without assigning it.
    pub fn score(&mut self, v: NodeId) -> &[f64] {
        for i in 0..self.sizes.len() {
            let ps = proximity_first(self.g, v, &self.members[i]) + proximity_second(self.g, v, &self.members[i]);
            self.scores[i] = ps * balance_factor(&self.sizes, i, self.gamma);
        }
        &self.scores
    }

    /// Places `v` and returns its partition.
    pub fn assign_node(&mut self, v: NodeId) -> MachineId {
        self.score(v);
        let mut best = 0;
        for i in 1..self.scores.len() {
            let (s, b) = (self.scores[i], self.scores[best]);
            if s > b || (s == b && self.sizes[i] < self.sizes[best]) {
                best = i;
            }
        }
        self.members[best].insert(v);
        self.sizes[best] += 1;
        best as MachineId
    }
}

/// Sequential streaming partitioning in the given order.
pub fn partition_stream(g: &CsrGraph, m: usize, gamma: f64, order: StreamOrder, seed: u64) -> PartitionAssignment {
    let stream = stream_order(g, order, seed);
    let owner = partition_sequence(g, m, gamma, &stream);
    PartitionAssignment {
        gamma,
        order: Some(order),
        ..PartitionAssignment::from_owner(owner, m)
    }
}

fn partition_sequence(g: &CsrGraph, m: usize, gamma: f64, stream: &[NodeId]) -> Vec<MachineId> {
    let mut owner = vec![0; g.node_count()];
    partition_segment(g, m, gamma, stream, |v, o| owner[v as usize] = o);
    owner
}

fn partition_segment(g: &CsrGraph, m: usize, gamma: f64, stream: &[NodeId], mut put: impl FnMut(NodeId, MachineId)) {
    let mut p = StreamingPartitioner::new(g, m, gamma);
    for &v in stream {
        put(v, p.assign_node(v));
    }
}

/// Splits the stream into `segments` contiguous pieces partitioned independently
/// (each with its own membership and size counters) and merges the results.
pub fn partition_parallel(
    g: &CsrGraph,
    m: usize,
    gamma: f64,
    segments: usize,
    order: StreamOrder,
    seed: u64,
) -> PartitionAssignment {
    let segments = segments.max(1);
    let stream = stream_order(g, order, seed);
    let chunk = stream.len().div_ceil(segments).max(1);
    let parts: Vec<Vec<(NodeId, MachineId)>> = stream
        .par_chunks(chunk)
        .map(|seg| {
            let mut out = Vec::with_capacity(seg.len());
            partition_segment(g, m, gamma, seg, |v, o| out.push((v, o)));
            out
        })
        .collect();
    let mut owner = vec![0; g.node_count()];
    for (v, o) in parts.into_iter().flatten() {
        owner[v as usize] = o;
    }
    PartitionAssignment {
        gamma,
        order: Some(order),
        segments,
        ..PartitionAssignment::from_owner(owner, m)
    }
}

/// Round-robin baseline: node `i` goes to machine `i mod m`.
pub fn partition_hash(g: &CsrGraph, m: usize) -> PartitionAssignment {
    let owner = (0..g.node_count()).map(|i| (i % m) as MachineId).collect();
    PartitionAssignment::from_owner(owner, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn members(ids: &[NodeId]) -> PartitionMembers {
        let mut p = PartitionMembers::new();
        for &v in ids {
            p.insert(v);
        }
        p
    }

    #[test]
    fn first_order_examples() {
        let g = CsrGraph::from_edges(6, &[(0, 1), (0, 2), (0, 3)], None, false).unwrap();
        assert_eq!(proximity_first(&g, 0, &members(&[2, 3, 5])), 2.0);
        assert_eq!(proximity_first(&g, 0, &members(&[])), 0.0);
        let w = CsrGraph::from_edges(3, &[(0, 1), (0, 2)], Some(&[0.5, 2.0]), false).unwrap();
        assert_abs_diff_eq!(proximity_first(&w, 0, &members(&[1, 2])), 2.5);
    }

    #[test]
    fn second_order_examples() {
        let tri = synth::cliques(1, 3);
        assert_eq!(proximity_second(&tri, 0, &members(&[1])), 1.0);
        assert_eq!(proximity_second(&tri, 0, &members(&[])), 0.0);
        let star = CsrGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], None, false).unwrap();
        assert_eq!(proximity_second(&star, 0, &members(&[1, 2, 3])), 0.0);
    }

    #[test]
    fn balance_factor_examples() {
        assert_eq!(balance_factor(&[3, 3, 3], 1, 1.0), 0.0);
        assert_eq!(balance_factor(&[2, 0], 0, 2.0), 0.0);
        assert_eq!(balance_factor(&[2, 0], 1, 2.0), 1.0);
        assert_eq!(balance_factor(&[0, 0, 0], 2, 2.0), 1.0);
        // adding a node to a partition lowers its τ
        assert!(balance_factor(&[3, 2], 0, 2.0) < balance_factor(&[2, 2], 0, 2.0));
    }

    #[test]
    fn assignment_rules() {
        let g = synth::cliques(1, 5);
        let mut p = StreamingPartitioner::new(&g, 3, 2.0);
        assert_eq!(p.assign_node(0), 0);
        // node 1 touches P0 but P0 already exceeds its slack; least-loaded empty P1 wins
        assert_eq!(p.assign_node(1), 1);

        // v = 0 with three neighbors in P1 and balanced sizes
        let g = CsrGraph::from_edges(8, &[(0, 4), (0, 5), (0, 6)], None, false).unwrap();
        let mut p = StreamingPartitioner::new(&g, 2, 2.0);
        for (v, i) in [(1, 0), (4, 1), (5, 1), (6, 1), (2, 0), (3, 0)] {
            p.members[i].insert(v);
            p.sizes[i] += 1;
        }
        assert_eq!(p.assign_node(0), 1);

        // the same neighborhood, but P1 is past its slack so τ < 0
        let mut p = StreamingPartitioner::new(&g, 2, 1.0);
        for (v, i) in [(1, 0), (4, 1), (5, 1), (6, 1), (2, 1), (3, 1)] {
            p.members[i].insert(v);
            p.sizes[i] += 1;
        }
        assert!(p.score(0)[1] < 0.0);
        assert_eq!(p.assign_node(0), 0);
    }

    #[test]
    fn single_partition() {
        let g = synth::gnm(50, 80, 1);
        let a = partition_stream(&g, 1, 2.0, StreamOrder::DfsDegree, 0);
        assert!(a.owner.iter().all(|&o| o == 0));
        assert_eq!(a.sizes, vec![50]);
    }

    /// Direct evaluation of the placement rule with hash sets.
    fn naive_stream(g: &CsrGraph, m: usize, gamma: f64, stream: &[NodeId]) -> Vec<MachineId> {
        use std::collections::HashSet;
        let nb = |v: NodeId| g.neighbors(v).iter().copied().collect::<HashSet<_>>();
        let mut parts: Vec<HashSet<NodeId>> = vec![HashSet::new(); m];
        let mut owner = vec![0; g.node_count()];
        for &v in stream {
            let total: usize = parts.iter().map(|p| p.len()).sum();
            let score = |p: &HashSet<NodeId>| {
                let ps: f64 = nb(v)
                    .iter()
                    .filter(|u| p.contains(u))
                    .map(|&u| {
                        let cm = nb(v).intersection(&nb(u)).filter(|&&x| x != u && x != v).count();
                        1.0 + cm as f64
                    })
                    .sum();
                let tau = if total == 0 {
                    1.0
                } else {
                    1.0 - p.len() as f64 / (gamma * total as f64 / m as f64)
                };
                ps * tau
            };
            let best = (0..m)
                .max_by(|&a, &b| {
                    score(&parts[a])
                        .partial_cmp(&score(&parts[b]))
                        .unwrap()
                        .then(parts[b].len().cmp(&parts[a].len()))
                        .then(b.cmp(&a))
                })
                .unwrap();
            parts[best].insert(v);
            owner[v as usize] = best as MachineId;
        }
        owner
    }

    #[test]
    fn disjoint_cliques_stay_whole_with_room() {
        // with γ > m a partition holding the whole stream so far keeps τ > 0
        let g = synth::cliques(2, 6);
        let a = partition_stream(&g, 2, 3.0, StreamOrder::DfsDegree, 0);
        for c in 0..2 {
            let first = a.owner_of(c * 6);
            assert!((c * 6..c * 6 + 6).all(|v| a.owner_of(v) == first), "{:?}", a.owner);
        }
        assert_eq!(a.edge_cut(&g), 0);
        assert_eq!(a.sizes, vec![6, 6]);
    }

    #[test]
    fn cliques_at_gamma_equal_m_split_evenly() {
        // τ = 1 − share when γ = m, so the first clique cannot stay on one side
        let g = synth::cliques(2, 6);
        let a = partition_stream(&g, 2, 2.0, StreamOrder::DfsDegree, 0);
        let stream = stream_order(&g, StreamOrder::DfsDegree, 0);
        assert_eq!(a.owner, naive_stream(&g, 2, 2.0, &stream));
        assert!(a.max_size() <= 13);
        assert!(a.edge_cut(&g) > 0);
    }

    #[test]
    fn parallel_with_one_segment_matches_sequential() {
        let g = synth::barabasi_albert(500, 3, 4);
        for order in [StreamOrder::BfsDegree, StreamOrder::DfsDegree, StreamOrder::Random] {
            let s = partition_stream(&g, 4, 2.0, order, 9);
            let p = partition_parallel(&g, 4, 2.0, 1, order, 9);
            assert_eq!(s.owner, p.owner);
        }
    }

    #[test]
    fn parallel_segments_balance() {
        let g = synth::barabasi_albert(10_000, 5, 2);
        let (m, gamma) = (4, 2.0);
        let p = partition_parallel(&g, m, gamma, 4, StreamOrder::BfsDegree, 0);
        assert_eq!(p.sizes.iter().sum::<usize>(), 10_000);
        let cap = gamma * 10_000.0 / m as f64;
        assert!(p.max_size() as f64 <= 1.1 * cap, "sizes {:?}", p.sizes);
        assert_eq!(p, partition_parallel(&g, m, gamma, 4, StreamOrder::BfsDegree, 0));
    }

    #[test]
    fn hash_baseline() {
        let g = synth::path(10);
        assert_eq!(partition_hash(&g, 2).sizes, vec![5, 5]);
        assert_eq!(partition_hash(&synth::path(8), 4).owner_of(7), 3);
    }

    #[test]
    fn file_round_trip() {
        let g = synth::gnm(30, 60, 3);
        let a = partition_stream(&g, 3, 2.0, StreamOrder::BfsDegree, 0);
        let mut buf = Vec::new();
        a.write(&mut buf).unwrap();
        let b = PartitionAssignment::read(buf.as_slice(), Some(3)).unwrap();
        assert_eq!(a.owner, b.owner);
        assert_eq!(a.sizes, b.sizes);
        assert!(PartitionAssignment::read("0 1\n2 0\n".as_bytes(), None).is_err());
        assert!(PartitionAssignment::read("0 x\n".as_bytes(), None).is_err());
    }

    proptest! {
        #[test]
        fn strict_slack_balances(n in 1usize..300, deg in 0usize..8, m in 1usize..7, seed in 0u64..1000) {
            let g = synth::gnm(n, n * deg / 2, seed);
            for order in [StreamOrder::Random, StreamOrder::BfsDegree, StreamOrder::DfsDegree] {
                let a = partition_stream(&g, m, 1.0, order, seed);
                prop_assert_eq!(a.sizes.iter().sum::<usize>(), n);
                prop_assert!(a.max_size() - a.min_size() <= 1, "{:?}", a.sizes);
            }
        }

        #[test]
        fn matches_naive_rule(n in 1usize..80, deg in 0usize..6, m in 1usize..5, gamma in 1.0f64..4.0, seed in 0u64..1000) {
            let g = synth::gnm(n, n * deg / 2, seed);
            let stream = stream_order(&g, StreamOrder::Random, seed);
            let a = partition_stream(&g, m, gamma, StreamOrder::Random, seed);
            prop_assert_eq!(a.owner, naive_stream(&g, m, gamma, &stream));
        }

        #[test]
        fn slack_bound_holds(n in 1usize..300, m in 1usize..6, gamma in 1.0f64..4.0, seed in 0u64..1000) {
            let g = synth::barabasi_albert(n, 3, seed);
            let a = partition_stream(&g, m, gamma, StreamOrder::DfsDegree, seed);
            prop_assert!(a.max_size() as f64 <= gamma * n as f64 / m as f64 + 1.0);
        }
    }
}
