use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::Serialize;

use crate::graph::NodeId;
use crate::rng;
use crate::walk_stats::CorpusStats;

use super::LearnError;

/// Row-major `f64` matrix whose elements can be read and written from many
/// threads at once. Each element is one atomic word, so reads never tear; the
/// read-modify-write in [`SharedMatrix::add_row`] is deliberately unsynchronized.
#[derive(Debug)]
pub struct SharedMatrix {
    data: Vec<AtomicU64>,
    rows: usize,
    cols: usize,
}

impl SharedMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: (0..rows * cols).map(|_| AtomicU64::new(0f64.to_bits())).collect(),
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        f64::from_bits(self.data[r * self.cols + c].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, r: usize, c: usize, x: f64) {
        self.data[r * self.cols + c].store(x.to_bits(), Ordering::Relaxed);
    }

    pub fn read_row(&self, r: usize, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.get(r, c);
        }
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.cols];
        self.read_row(r, &mut v);
        v
    }

    pub fn write_row(&self, r: usize, src: &[f64]) {
        for (c, &x) in src.iter().enumerate() {
            self.set(r, c, x);
        }
    }

    pub fn add_row(&self, r: usize, delta: &[f64]) {
        for (c, &x) in delta.iter().enumerate() {
            self.set(r, c, self.get(r, c) + x);
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data
            .iter()
            .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
            .collect()
    }

    pub fn from_vec(rows: usize, cols: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), rows * cols);
        Self {
            data: v.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            rows,
            cols,
        }
    }
}

impl Clone for SharedMatrix {
    fn clone(&self) -> Self {
        Self::from_vec(self.rows, self.cols, &self.to_vec())
    }
}

/// Contiguous rows sharing one corpus frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HotnessBlock {
    pub frequency: u64,
    pub start: usize,
    pub end: usize,
}

impl HotnessBlock {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Input and output embedding matrices with rows in descending corpus frequency.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    pub dim: usize,
    /// `order[row]` is the node stored in `row`.
    pub order: Vec<NodeId>,
    /// `row_of[node]` inverts `order`.
    pub row_of: Vec<u32>,
    /// Corpus frequency of each row.
    pub freq: Vec<u64>,
    /// Tiles all rows; a trailing zero-frequency block holds nodes absent from
    /// the corpus.
    pub blocks: Vec<HotnessBlock>,
    pub phi_in: SharedMatrix,
    pub phi_out: SharedMatrix,
}

/// Rows ordered by frequency, then node id, and the blocks of equal frequency.
pub fn frequency_order(ocn: &[u64]) -> (Vec<NodeId>, Vec<HotnessBlock>) {
    let mut order: Vec<NodeId> = (0..ocn.len() as NodeId).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(ocn[v as usize]), v));
    let mut blocks: Vec<HotnessBlock> = Vec::new();
    for (row, &v) in order.iter().enumerate() {
        let f = ocn[v as usize];
        match blocks.last_mut() {
            Some(b) if b.frequency == f => b.end = row + 1,
            _ => blocks.push(HotnessBlock {
                frequency: f,
                start: row,
                end: row + 1,
            }),
        }
    }
    (order, blocks)
}

impl EmbeddingStore {
    /// Builds the store: `φ_in` uniform in `±0.5/d`, `φ_out` zero.
    pub fn build(stats: &CorpusStats, dim: usize, seed: u64) -> Result<Self, LearnError> {
        if stats.total_ocn == 0 {
            return Err(LearnError::EmptyCorpus);
        }
        if dim == 0 {
            return Err(LearnError::Config("dimension must be at least 1".into()));
        }
        let n = stats.ocn.len();
        let (order, blocks) = frequency_order(&stats.ocn);
        let mut row_of = vec![0u32; n];
        for (row, &v) in order.iter().enumerate() {
            row_of[v as usize] = row as u32;
        }
        let freq = order.iter().map(|&v| stats.ocn[v as usize]).collect();
        let mut r = rng::stream(seed, 0x1A1);
        let half = 0.5 / dim as f64;
        let init: Vec<f64> = (0..n * dim).map(|_| r.random_range(-half..half)).collect();
        Ok(Self {
            dim,
            order,
            row_of,
            freq,
            blocks,
            phi_in: SharedMatrix::from_vec(n, dim, &init),
            phi_out: SharedMatrix::zeros(n, dim),
        })
    }

    pub fn node_count(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn row(&self, v: NodeId) -> usize {
        self.row_of[v as usize] as usize
    }

    /// Blocks whose rows occur in the corpus.
    pub fn hot_blocks(&self) -> impl Iterator<Item = &HotnessBlock> {
        self.blocks.iter().filter(|b| b.frequency > 0)
    }

    pub fn input_vector(&self, v: NodeId) -> Vec<f64> {
        self.phi_in.row(self.row(v))
    }

    pub fn output_vector(&self, v: NodeId) -> Vec<f64> {
        self.phi_out.row(self.row(v))
    }

    /// Same ordering and block structure.
    pub fn compatible(&self, other: &Self) -> bool {
        self.dim == other.dim && self.order == other.order && self.blocks == other.blocks
    }

    /// Node-indexed vectors for scoring.
    pub fn export(&self, vectors: VectorChoice) -> Embeddings {
        let n = self.node_count();
        let mut data = vec![0.0; n * self.dim];
        for v in 0..n {
            let row = self.row(v as NodeId);
            let dst = &mut data[v * self.dim..(v + 1) * self.dim];
            for (c, x) in dst.iter_mut().enumerate() {
                *x = match vectors {
                    VectorChoice::Input => self.phi_in.get(row, c),
                    VectorChoice::Mean => 0.5 * (self.phi_in.get(row, c) + self.phi_out.get(row, c)),
                };
            }
        }
        Embeddings { dim: self.dim, data }
    }
}

/// Which matrix represents a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorChoice {
    #[default]
    Input,
    /// `(φ_in + φ_out) / 2`.
    Mean,
}

/// Dense node-indexed embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Embeddings {
    pub fn node_count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn vector(&self, v: NodeId) -> &[f64] {
        let v = v as usize;
        &self.data[v * self.dim..(v + 1) * self.dim]
    }

    pub fn dot(&self, u: NodeId, v: NodeId) -> f64 {
        self.vector(u).iter().zip(self.vector(v)).map(|(a, b)| a * b).sum()
    }

    /// Header `node_count d`, then `node_id v1 … vd` per node.
    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{} {}", self.node_count(), self.dim)?;
        for v in 0..self.node_count() {
            write!(out, "{v}")?;
            for x in self.vector(v as NodeId) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        self.write(File::create(path)?)
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, LearnError> {
        let mut lines = input.lines().enumerate();
        let bad = |line: usize, msg: &str| LearnError::Format {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
        let header = header?;
        let mut h = header.split_whitespace().map(|t| t.parse::<usize>());
        let (Some(Ok(n)), Some(Ok(dim)), None) = (h.next(), h.next(), h.next()) else {
            return Err(bad(0, "header must be `node_count dim`"));
        };
        let mut data = vec![0.0; n * dim];
        let mut seen = vec![false; n];
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let v: usize = cols
                .next()
                .and_then(|t| t.parse().ok())
                .filter(|&v| v < n)
                .ok_or_else(|| bad(i, "invalid node id"))?;
            let row: Vec<f64> = cols
                .map(|t| t.parse::<f64>().map_err(|_| bad(i, "invalid value")))
                .collect::<Result<_, _>>()?;
            if row.len() != dim {
                return Err(bad(i, "wrong number of values"));
            }
            data[v * dim..(v + 1) * dim].copy_from_slice(&row);
            seen[v] = true;
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(LearnError::Format {
                line: 0,
                msg: format!("no vector for node {v}"),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LearnError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats(ocn: &[u64]) -> CorpusStats {
        CorpusStats {
            ocn: ocn.to_vec(),
            total_ocn: ocn.iter().sum(),
            ..Default::default()
        }
    }

    #[test]
    fn blocks_group_equal_frequencies() {
        // a:5, b:5, c:1
        let s = EmbeddingStore::build(&stats(&[5, 5, 1]), 4, 0).unwrap();
        assert_eq!(s.blocks.len(), 2);
        assert_eq!(s.blocks.iter().map(HotnessBlock::len).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(s.order, vec![0, 1, 2]);

        let s = EmbeddingStore::build(&stats(&[1, 4, 2, 3]), 2, 0).unwrap();
        assert_eq!(s.blocks.len(), 4);
        assert_eq!(s.order, vec![1, 3, 2, 0]);
        assert_eq!(s.freq, vec![4, 3, 2, 1]);
    }

    #[test]
    fn zero_frequency_rows_form_a_cold_tail() {
        let s = EmbeddingStore::build(&stats(&[0, 3, 0, 1]), 2, 0).unwrap();
        assert_eq!(s.order, vec![1, 3, 0, 2]);
        assert_eq!(s.blocks.last().unwrap().frequency, 0);
        assert_eq!(s.hot_blocks().count(), 2);
    }

    #[test]
    fn initialization() {
        let s = EmbeddingStore::build(&stats(&[3, 2, 1, 1]), 8, 5).unwrap();
        let v = s.phi_in.to_vec();
        assert!(v.iter().all(|x| x.abs() <= 0.5 / 8.0));
        assert!(v.iter().any(|&x| x != 0.0));
        assert!(s.phi_out.to_vec().iter().all(|&x| x == 0.0));
        assert!(EmbeddingStore::build(&stats(&[0, 0]), 8, 5).is_err());
        assert!(EmbeddingStore::build(&stats(&[1]), 0, 5).is_err());
    }

    #[test]
    fn embeddings_round_trip() {
        let s = EmbeddingStore::build(&stats(&[3, 1, 2]), 3, 1).unwrap();
        let e = s.export(VectorChoice::Input);
        assert_eq!(e.vector(1), s.input_vector(1).as_slice());
        let mut buf = Vec::new();
        e.write(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("3 3\n0 "));
        assert_eq!(Embeddings::read(buf.as_slice()).unwrap(), e);
        assert!(Embeddings::read("2 2\n0 1 2\n".as_bytes()).is_err());
        assert!(Embeddings::read("1 2\n0 1\n".as_bytes()).is_err());
    }

    #[test]
    fn mean_vectors() {
        let s = EmbeddingStore::build(&stats(&[1, 1]), 2, 1).unwrap();
        s.phi_out.write_row(s.row(0), &[1.0, 1.0]);
        let e = s.export(VectorChoice::Mean);
        let i = s.input_vector(0);
        assert_eq!(e.vector(0), &[0.5 * (i[0] + 1.0), 0.5 * (i[1] + 1.0)]);
    }

    proptest! {
        #[test]
        fn ordering_invariants(ocn in prop::collection::vec(0u64..20, 1..200)) {
            prop_assume!(ocn.iter().sum::<u64>() > 0);
            let s = EmbeddingStore::build(&stats(&ocn), 2, 0).unwrap();
            prop_assert!(s.freq.windows(2).all(|w| w[0] >= w[1]));
            for v in 0..ocn.len() as NodeId {
                prop_assert_eq!(s.order[s.row(v)], v);
            }
            let mut next = 0;
            for b in &s.blocks {
                prop_assert_eq!(b.start, next);
                prop_assert!(s.freq[b.start..b.end].iter().all(|&f| f == b.frequency));
                next = b.end;
            }
            prop_assert_eq!(next, ocn.len());
            let max = *ocn.iter().max().unwrap();
            prop_assert!(s.hot_blocks().count() as u64 <= max);
        }
    }
}
