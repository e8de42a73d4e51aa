//! Immutable compressed-sparse-row graph.
//!
//! Node ids are dense and 0-based. Every adjacency slice is strictly ascending so
//! neighbor sets can be intersected with [`intersect::intersect_with`]. Undirected
//! edges are stored in both endpoint slices; a self-loop is stored once.

pub mod intersect;
mod io;

use thiserror::Error;

pub use intersect::{checked_intersect, intersect_count, intersect_galloping};
pub use io::{load_edge_list, parse_edge_list, read_binary, write_binary, write_edge_list};

pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("node {0} out of range (node_count = {1})")]
    OutOfRange(NodeId, usize),
    #[error("intersection operand is not strictly sorted")]
    Unsorted,
    #[error("bad binary graph file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrGraph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    weights: Option<Vec<f64>>,
    directed: bool,
}

impl CsrGraph {
    /// Builds a graph from an edge list.
    ///
    /// Duplicate edges are merged and, when weighted, their weights summed. For an
    /// undirected graph `(u, v)` and `(v, u)` are the same edge.
    pub fn from_edges(
        node_count: usize,
        edges: &[(NodeId, NodeId)],
        weights: Option<&[f64]>,
        directed: bool,
    ) -> Result<Self, GraphError> {
        if let Some(w) = weights {
            if w.len() != edges.len() {
                return Err(GraphError::Invalid(format!(
                    "{} edges but {} weights",
                    edges.len(),
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(GraphError::Invalid(format!("edge weight {bad} must be positive")));
            }
        }
        if node_count > NodeId::MAX as usize {
            return Err(GraphError::Invalid(format!("{node_count} nodes exceed the id space")));
        }
        for &(u, v) in edges {
            for x in [u, v] {
                if x as usize >= node_count {
                    return Err(GraphError::OutOfRange(x, node_count));
                }
            }
        }

        // canonical (src, dst, weight) triples, deduplicated with weights summed
        let mut canon: Vec<(NodeId, NodeId, f64)> = edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| {
                let w = weights.map_or(1.0, |w| w[i]);
                if directed || u <= v {
                    (u, v, w)
                } else {
                    (v, u, w)
                }
            })
            .collect();
        canon.sort_unstable_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(NodeId, NodeId, f64)> = Vec::with_capacity(canon.len());
        for (u, v, w) in canon {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => merged.push((u, v, w)),
            }
        }

        let mut degree = vec![0usize; node_count];
        for &(u, v, _) in &merged {
            degree[u as usize] += 1;
            if !directed && u != v {
                degree[v as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let edge_count = *offsets.last().unwrap();
        let mut neighbors = vec![0 as NodeId; edge_count];
        let mut wts = vec![0.0f64; edge_count];
        let mut cursor = offsets[..node_count].to_vec();
        let mut put = |from: NodeId, to: NodeId, w: f64| {
            let slot = &mut cursor[from as usize];
            neighbors[*slot] = to;
            wts[*slot] = w;
            *slot += 1;
        };
        for &(u, v, w) in &merged {
            put(u, v, w);
            if !directed && u != v {
                put(v, u, w);
            }
        }
        // sort each slice together with its weights
        for n in 0..node_count {
            let (lo, hi) = (offsets[n], offsets[n + 1]);
            if neighbors[lo..hi].windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            let mut pairs: Vec<(NodeId, f64)> = neighbors[lo..hi]
                .iter()
                .copied()
                .zip(wts[lo..hi].iter().copied())
                .collect();
            pairs.sort_unstable_by_key(|p| p.0);
            for (k, (nb, w)) in pairs.into_iter().enumerate() {
                neighbors[lo + k] = nb;
                wts[lo + k] = w;
            }
        }

        Ok(Self {
            offsets,
            neighbors,
            weights: weights.map(|_| wts),
            directed,
        })
    }

    /// Assembles a graph from raw CSR arrays, validating every invariant.
    pub fn from_raw(
        offsets: Vec<usize>,
        neighbors: Vec<NodeId>,
        weights: Option<Vec<f64>>,
        directed: bool,
    ) -> Result<Self, GraphError> {
        let g = Self {
            offsets,
            neighbors,
            weights,
            directed,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: &str| Err(GraphError::Invalid(m.to_string()));
        if self.offsets.first() != Some(&0) {
            return bad("offsets must start at 0");
        }
        if *self.offsets.last().unwrap() != self.neighbors.len() {
            return bad("offsets must end at edge_count");
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return bad("offsets must be non-decreasing");
        }
        let n = self.node_count();
        for u in 0..n {
            let nb = self.neighbors(u as NodeId);
            if !intersect::is_strictly_sorted(nb) {
                return bad("adjacency slices must be strictly ascending");
            }
            if nb.last().is_some_and(|&v| v as usize >= n) {
                return bad("neighbor id out of range");
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.neighbors.len() {
                return bad("weights length must equal edge_count");
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return bad("weights must be positive");
            }
        }
        if !self.directed {
            for u in 0..n as NodeId {
                for &v in self.neighbors(u) {
                    if !self.has_edge(v, u) {
                        return bad("undirected edge missing its reverse");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn empty(directed: bool) -> Self {
        Self {
            offsets: vec![0],
            neighbors: Vec::new(),
            weights: None,
            directed,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of stored adjacency entries (undirected edges count twice, self-loops once).
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline]
    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    #[inline]
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub fn degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.offsets[u + 1] - self.offsets[u]
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        let u = u as usize;
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Edge weights aligned with [`neighbors`](Self::neighbors), if the graph is weighted.
    #[inline]
    pub fn neighbor_weights(&self, u: NodeId) -> Option<&[f64]> {
        let u = u as usize;
        self.weights.as_ref().map(|w| &w[self.offsets[u]..self.offsets[u + 1]])
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Weight of edge `(u, v)`: 1.0 on unweighted graphs, `None` if the edge is absent.
    pub fn edge_weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let i = self.neighbors(u).binary_search(&v).ok()?;
        Some(self.neighbor_weights(u).map_or(1.0, |w| w[i]))
    }

    pub fn check_node(&self, u: NodeId) -> Result<(), GraphError> {
        if (u as usize) < self.node_count() {
            Ok(())
        } else {
            Err(GraphError::OutOfRange(u, self.node_count()))
        }
    }

    /// `|N(u) ∩ N(v)|` where a node never counts as its own neighbor, so `u` and `v`
    /// themselves are excluded from the intersection.
    pub fn common_neighbor_count(&self, u: NodeId, v: NodeId) -> Result<usize, GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        Ok(self.common_neighbors_unchecked(u, v))
    }

    #[inline]
    pub(crate) fn common_neighbors_unchecked(&self, u: NodeId, v: NodeId) -> usize {
        let mut n = 0;
        intersect::intersect_with(self.neighbors(u), self.neighbors(v), |x| {
            if x != u && x != v {
                n += 1;
            }
        });
        n
    }

    /// Iterates stored edges `(u, v, w)`; undirected graphs yield each edge once with `u <= v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.node_count() as NodeId).flat_map(move |u| {
            let w = self.neighbor_weights(u);
            self.neighbors(u)
                .iter()
                .enumerate()
                .filter(move |&(_, &v)| self.directed || u <= v)
                .map(move |(i, &v)| (u, v, w.map_or(1.0, |w| w[i])))
        })
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count() as NodeId)
            .map(|u| self.degree(u))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn triangle() -> CsrGraph {
        CsrGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], None, false).unwrap()
    }

    fn naive_common(g: &CsrGraph, u: NodeId, v: NodeId) -> usize {
        let a: BTreeSet<_> = g.neighbors(u).iter().filter(|&&x| x != u).collect();
        let b: BTreeSet<_> = g.neighbors(v).iter().filter(|&&x| x != v).collect();
        a.intersection(&b).filter(|&&&x| x != u && x != v).count()
    }

    #[test]
    fn builds_path_csr() {
        let g = CsrGraph::from_edges(3, &[(0, 1), (1, 2)], None, false).unwrap();
        assert_eq!(g.offsets(), &[0, 1, 3, 4]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        g.validate().unwrap();
    }

    #[test]
    fn duplicates_merge_and_weights_sum() {
        let g = CsrGraph::from_edges(2, &[(0, 1), (1, 0), (0, 1)], Some(&[1.0, 2.0, 0.5]), false).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.edge_weight(0, 1), Some(3.5));
        assert_eq!(g.edge_weight(1, 0), Some(3.5));
        let d = CsrGraph::from_edges(2, &[(0, 1), (1, 0)], None, true).unwrap();
        assert_eq!(d.edge_count(), 2);
        assert!(d.has_edge(1, 0));
    }

    #[test]
    fn self_loop_kept_once() {
        let g = CsrGraph::from_edges(2, &[(0, 0), (0, 1)], None, false).unwrap();
        assert_eq!(g.neighbors(0), &[0, 1]);
        assert_eq!(g.degree(0), 2);
        // the self-loop never counts as a common neighbor
        assert_eq!(g.common_neighbor_count(0, 0).unwrap(), 1);
        assert_eq!(g.common_neighbor_count(0, 1).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(CsrGraph::from_edges(2, &[(0, 1)], Some(&[0.0]), false).is_err());
        assert!(CsrGraph::from_edges(2, &[(0, 1)], Some(&[-1.0]), false).is_err());
        assert!(CsrGraph::from_edges(2, &[(0, 1)], Some(&[f64::NAN]), false).is_err());
    }

    #[test]
    fn common_neighbors() {
        let g = triangle();
        assert_eq!(g.common_neighbor_count(0, 1).unwrap(), 1);
        assert_eq!(g.common_neighbor_count(0, 0).unwrap(), 2);
        let iso = CsrGraph::from_edges(3, &[(0, 1)], None, false).unwrap();
        assert_eq!(iso.common_neighbor_count(2, 0).unwrap(), 0);
        assert!(matches!(
            g.common_neighbor_count(0, 3),
            Err(GraphError::OutOfRange(3, 3))
        ));
    }

    #[test]
    fn raw_validation() {
        assert!(CsrGraph::from_raw(vec![0, 1], vec![0], None, true).is_ok());
        assert!(CsrGraph::from_raw(vec![0, 2], vec![0, 0], None, true).is_err());
        assert!(CsrGraph::from_raw(vec![0, 1, 1], vec![1], None, false).is_err());
        assert!(CsrGraph::from_raw(vec![1, 1], vec![0], None, true).is_err());
    }

    fn edge_list() -> impl Strategy<Value = (usize, Vec<(NodeId, NodeId)>)> {
        (1usize..40).prop_flat_map(|n| {
            let id = 0..n as NodeId;
            (Just(n), prop::collection::vec((id.clone(), id), 0..150))
        })
    }

    proptest! {
        #[test]
        fn undirected_symmetry_and_degree_sum((n, edges) in edge_list()) {
            let g = CsrGraph::from_edges(n, &edges, None, false).unwrap();
            g.validate().unwrap();
            let distinct: BTreeSet<(NodeId, NodeId)> =
                edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
            let loops = distinct.iter().filter(|e| e.0 == e.1).count();
            let deg_sum: usize = (0..n as NodeId).map(|u| g.degree(u)).sum();
            prop_assert_eq!(deg_sum, 2 * distinct.len() - loops);
            for u in 0..n as NodeId {
                for &v in g.neighbors(u) {
                    prop_assert!(g.has_edge(v, u));
                }
            }
        }

        #[test]
        fn common_neighbors_match_naive((n, edges) in edge_list(), a in 0u32..40, b in 0u32..40) {
            let g = CsrGraph::from_edges(n, &edges, None, false).unwrap();
            let (a, b) = (a % n as NodeId, b % n as NodeId);
            prop_assert_eq!(g.common_neighbor_count(a, b).unwrap(), naive_common(&g, a, b));
        }
    }
}
