use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::graph::{CsrGraph, NodeId};
use crate::rng;

/// Order in which nodes are streamed to the partitioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamOrder {
    Random,
    /// Breadth-first; each frontier expansion enqueues neighbors by descending degree.
    BfsDegree,
    /// Depth-first, always descending into the highest-degree unexplored neighbor.
    DfsDegree,
}

impl fmt::Display for StreamOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamOrder::Random => "random",
            StreamOrder::BfsDegree => "bfs-degree",
            StreamOrder::DfsDegree => "dfs-degree",
        })
    }
}

impl FromStr for StreamOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(StreamOrder::Random),
            "bfs-degree" | "bfs_degree" => Ok(StreamOrder::BfsDegree),
            "dfs-degree" | "dfs_degree" => Ok(StreamOrder::DfsDegree),
            other => Err(format!("unknown stream order {other:?}")),
        }
    }
}

/// Emits every node exactly once. Traversal orders restart each component from the
/// highest-degree unvisited node (lowest id on ties).
pub fn stream_order(g: &CsrGraph, order: StreamOrder, seed: u64) -> Vec<NodeId> {
    let n = g.node_count();
    match order {
        StreamOrder::Random => {
            let mut ids: Vec<NodeId> = (0..n as NodeId).collect();
            ids.shuffle(&mut rng::stream(seed, 0x0DE));
            ids
        }
        StreamOrder::BfsDegree => bfs_degree(g),
        StreamOrder::DfsDegree => dfs_degree(g),
    }
}

fn by_degree_desc(g: &CsrGraph, ids: &mut [NodeId]) {
    ids.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
}

fn roots(g: &CsrGraph) -> Vec<NodeId> {
    let mut ids: Vec<NodeId> = (0..g.node_count() as NodeId).collect();
    by_degree_desc(g, &mut ids);
    ids
}

fn bfs_degree(g: &CsrGraph) -> Vec<NodeId> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut next: Vec<NodeId> = Vec::new();
    for root in roots(g) {
        if seen[root as usize] {
            continue;
        }
        seen[root as usize] = true;
        out.push(root);
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            next.clear();
            next.extend(g.neighbors(u).iter().copied().filter(|&v| !seen[v as usize]));
            by_degree_desc(g, &mut next);
            for &v in &next {
                seen[v as usize] = true;
                out.push(v);
                queue.push_back(v);
            }
        }
    }
    out
}

fn dfs_degree(g: &CsrGraph) -> Vec<NodeId> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    // (children ordered by descending degree, cursor)
    let mut stack: Vec<(Vec<NodeId>, usize)> = Vec::new();
    let children = |u: NodeId| {
        let mut c = g.neighbors(u).to_vec();
        by_degree_desc(g, &mut c);
        c
    };
    for root in roots(g) {
        if seen[root as usize] {
            continue;
        }
        seen[root as usize] = true;
        out.push(root);
        stack.push((children(root), 0));
        while let Some((kids, cursor)) = stack.last_mut() {
            while *cursor < kids.len() && seen[kids[*cursor] as usize] {
                *cursor += 1;
            }
            if *cursor == kids.len() {
                stack.pop();
                continue;
            }
            let v = kids[*cursor];
            *cursor += 1;
            seen[v as usize] = true;
            out.push(v);
            stack.push((children(v), 0));
        }
    }
    out
}
