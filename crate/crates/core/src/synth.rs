//! Seeded synthetic graphs for tests, benchmarks and demos.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::graph::{CsrGraph, NodeId};
use crate::rng;

/// Preferential attachment: each new node links to `m` distinct existing nodes
/// chosen proportionally to degree. Average degree approaches `2m`.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> CsrGraph {
    holme_kim(n, m, 0.0, seed)
}

/// Power-law graph with tunable clustering: after each preferential link, with
/// probability `triad_p` the next link closes a triangle through a neighbor of the
/// node just linked.
pub fn holme_kim(n: usize, m: usize, triad_p: f64, seed: u64) -> CsrGraph {
    let mut rng = rng::stream(seed, 0xB0A);
    let m = m.max(1);
    let core = (m + 1).min(n);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    // endpoint multiset: sampling uniformly from it is degree-proportional
    let mut ends: Vec<NodeId> = Vec::new();
    fn link(u: NodeId, v: NodeId, edges: &mut Vec<(NodeId, NodeId)>, adj: &mut [Vec<NodeId>], ends: &mut Vec<NodeId>) {
        edges.push((u, v));
        adj[u as usize].push(v);
        adj[v as usize].push(u);
        ends.push(u);
        ends.push(v);
    }
    for u in 0..core as NodeId {
        for v in 0..u {
            link(u, v, &mut edges, &mut adj, &mut ends);
        }
    }
    for u in core as NodeId..n as NodeId {
        let mut chosen: HashSet<NodeId> = HashSet::with_capacity(m);
        let mut last: Option<NodeId> = None;
        let mut guard = 0;
        while chosen.len() < m.min(u as usize) && guard < 100 * m {
            guard += 1;
            let candidate = match last {
                Some(prev) if rng.random::<f64>() < triad_p => {
                    let nb = &adj[prev as usize];
                    nb[rng.random_range(0..nb.len())]
                }
                _ => ends[rng.random_range(0..ends.len())],
            };
            if candidate != u && chosen.insert(candidate) {
                last = Some(candidate);
            }
        }
        let mut chosen: Vec<_> = chosen.into_iter().collect();
        chosen.sort_unstable();
        for v in chosen {
            link(u, v, &mut edges, &mut adj, &mut ends);
        }
    }
    CsrGraph::from_edges(n, &edges, None, false).expect("generated edges are valid")
}

/// Social-network-like graph: Holme-Kim growth inside communities. Each new node
/// joins one of `communities` groups (sizes skewed by a Zipf-like weight) and
/// makes `m` links. A link closes a triangle with probability `triad_p`, else it
/// attaches preferentially, to the whole graph with probability `mix` and
/// otherwise within the node's own community. Triangles reaching into another
/// community are kept with probability `mix`.
pub fn social(n: usize, m: usize, communities: usize, mix: f64, triad_p: f64, seed: u64) -> CsrGraph {
    social_with_labels(n, m, communities, mix, triad_p, seed).0
}

/// [`social`] plus every node's community.
pub fn social_with_labels(
    n: usize,
    m: usize,
    communities: usize,
    mix: f64,
    triad_p: f64,
    seed: u64,
) -> (CsrGraph, Vec<u32>) {
    let mut rng = rng::stream(seed, 0x50C);
    let m = m.max(1);
    let k = communities.max(1);
    let weights: Vec<f64> = (0..k).map(|i| 1.0 / (i as f64 + 1.0).powf(0.8)).collect();
    let pick = WeightedIndex::new(&weights).expect("weights are positive");
    let label: Vec<u32> = (0..n).map(|_| pick.sample(&mut rng) as u32).collect();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut ends: Vec<NodeId> = Vec::new();
    let mut local_ends: Vec<Vec<NodeId>> = vec![Vec::new(); k];
    for u in 1..n as NodeId {
        let own = label[u as usize] as usize;
        let mut chosen: HashSet<NodeId> = HashSet::with_capacity(m);
        let mut last: Option<NodeId> = None;
        let mut guard = 0;
        while chosen.len() < m.min(u as usize) && guard < 100 * m {
            guard += 1;
            let candidate = match last {
                Some(prev) if rng.random::<f64>() < triad_p => {
                    let nb = &adj[prev as usize];
                    let w = nb[rng.random_range(0..nb.len())];
                    // closing a triangle leaves the community only as often as a direct link
                    if label[w as usize] as usize != own && rng.random::<f64>() >= mix {
                        continue;
                    }
                    w
                }
                _ => {
                    let pool = if rng.random::<f64>() < mix || local_ends[own].is_empty() {
                        &ends
                    } else {
                        &local_ends[own]
                    };
                    if pool.is_empty() {
                        rng.random_range(0..u)
                    } else {
                        pool[rng.random_range(0..pool.len())]
                    }
                }
            };
            if candidate != u && chosen.insert(candidate) {
                last = Some(candidate);
            }
        }
        let mut chosen: Vec<_> = chosen.into_iter().collect();
        chosen.sort_unstable();
        for v in chosen {
            edges.push((u, v));
            adj[u as usize].push(v);
            adj[v as usize].push(u);
            ends.extend([u, v]);
            local_ends[own].push(u);
            local_ends[label[v as usize] as usize].push(v);
        }
    }
    let g = CsrGraph::from_edges(n, &edges, None, false).expect("generated edges are valid");
    (g, label)
}

/// Uniform random graph with `m` distinct undirected edges (no self-loops).
pub fn gnm(n: usize, m: usize, seed: u64) -> CsrGraph {
    let mut rng = rng::stream(seed, 0x6E3);
    let max_edges = n * n.saturating_sub(1) / 2;
    let m = m.min(max_edges);
    let mut set = HashSet::with_capacity(m);
    while set.len() < m {
        let u = rng.random_range(0..n as NodeId);
        let v = rng.random_range(0..n as NodeId);
        if u != v {
            set.insert((u.min(v), u.max(v)));
        }
    }
    let mut edges: Vec<_> = set.into_iter().collect();
    edges.sort_unstable();
    CsrGraph::from_edges(n, &edges, None, false).expect("generated edges are valid")
}

/// `count` disjoint cliques of `size` nodes each; clique `c` holds ids
/// `c*size .. (c+1)*size`.
pub fn cliques(count: usize, size: usize) -> CsrGraph {
    let mut edges = Vec::new();
    for c in 0..count {
        let base = (c * size) as NodeId;
        for i in 0..size as NodeId {
            for j in 0..i {
                edges.push((base + i, base + j));
            }
        }
    }
    CsrGraph::from_edges(count * size, &edges, None, false).expect("generated edges are valid")
}

pub fn path(n: usize) -> CsrGraph {
    let edges: Vec<_> = (1..n as NodeId).map(|i| (i - 1, i)).collect();
    CsrGraph::from_edges(n, &edges, None, false).expect("generated edges are valid")
}

/// Planted-partition graph: `groups` equal communities, each node draws
/// `deg_in` partners inside its community and `deg_out` outside.
pub fn planted_partition(n: usize, groups: usize, deg_in: usize, deg_out: usize, seed: u64) -> CsrGraph {
    let mut rng = rng::stream(seed, 0x9A9);
    let groups = groups.max(1);
    let size = n.div_ceil(groups);
    let mut edges = Vec::new();
    for u in 0..n {
        let g = u / size;
        let lo = g * size;
        let hi = ((g + 1) * size).min(n);
        for _ in 0..deg_in {
            let v = rng.random_range(lo..hi);
            if v != u {
                edges.push((u as NodeId, v as NodeId));
            }
        }
        for _ in 0..deg_out {
            let v = rng.random_range(0..n);
            if v / size != g {
                edges.push((u as NodeId, v as NodeId));
            }
        }
    }
    CsrGraph::from_edges(n, &edges, None, false).expect("generated edges are valid")
}
