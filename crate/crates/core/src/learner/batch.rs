//! One worker lifetime: a batch of walks trained in lockstep with shared negatives.
//!
//! At step `t`, every walk still long enough contributes the window centered on
//! its `t`-th node. The context vectors of all those windows form the rows of one
//! matrix `C`, and the windows' targets followed by the step's `K` shared
//! negatives form `O`. A target doubles as a negative for the other windows.
//! Logits are `C·Oᵀ`, and with `G = lr·(label − σ(C·Oᵀ))` (masked where a negative
//! coincides with the row's own target) the updates are `ΔC = G·O` and
//! `ΔO = Gᵀ·C`, all taken at the step's starting parameters. The products are
//! plain loops over scratch buffers reused across steps; at these shapes
//! (a few rows by `d`) they beat a general matrix-multiply kernel.
//!
//! Context and negative rows live in worker-local buffers that are flushed to
//! the global matrices as deltas when the lifetime ends. Targets are written to
//! the global `φ_out` directly.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::graph::NodeId;

use super::store::EmbeddingStore;
use super::LearnError;

/// Draws nodes with probability proportional to `ocn(v)^{3/4}`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    alias: WeightedAliasIndex<f64>,
    nodes: Vec<NodeId>,
}

impl NegativeSampler {
    pub fn new(ocn: &[u64]) -> Result<Self, LearnError> {
        let (nodes, weights): (Vec<NodeId>, Vec<f64>) = ocn
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v as NodeId, (c as f64).powf(0.75)))
            .unzip();
        let alias = WeightedAliasIndex::new(weights).map_err(|_| LearnError::EmptyCorpus)?;
        Ok(Self { alias, nodes })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeId {
        self.nodes[self.alias.sample(rng)]
    }

    /// `k·l` draws; step `t` of a lifetime uses `[t·k, (t+1)·k)`.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, k: usize, l: usize, rng: &mut R) -> Vec<NodeId> {
        (0..k * l).map(|_| self.sample(rng)).collect()
    }
}

/// Local copies of rows plus the values they had when loaded.
#[derive(Debug, Clone)]
struct RowBuffer {
    dim: usize,
    rows: Vec<usize>,
    slot: HashMap<usize, usize>,
    data: Vec<f64>,
    snapshot: Vec<f64>,
}

impl RowBuffer {
    fn load(rows: impl IntoIterator<Item = usize>, read: impl Fn(usize, &mut [f64]), dim: usize) -> Self {
        let mut slot = HashMap::new();
        let mut list = Vec::new();
        for r in rows {
            slot.entry(r).or_insert_with(|| {
                list.push(r);
                list.len() - 1
            });
        }
        let mut data = vec![0.0; list.len() * dim];
        for (i, &r) in list.iter().enumerate() {
            read(r, &mut data[i * dim..(i + 1) * dim]);
        }
        Self {
            dim,
            rows: list,
            slot,
            snapshot: data.clone(),
            data,
        }
    }

    #[inline]
    fn get(&self, s: usize) -> &[f64] {
        &self.data[s * self.dim..(s + 1) * self.dim]
    }

    #[inline]
    fn get_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.dim..(s + 1) * self.dim]
    }

    fn delta(&self, row: usize) -> Option<Vec<f64>> {
        let i = *self.slot.get(&row)?;
        let d = self.dim;
        Some(
            self.data[i * d..(i + 1) * d]
                .iter()
                .zip(&self.snapshot[i * d..(i + 1) * d])
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    fn flush(&self, add: impl Fn(usize, &[f64])) {
        let mut delta = vec![0.0; self.dim];
        for (i, &r) in self.rows.iter().enumerate() {
            let range = i * self.dim..(i + 1) * self.dim;
            for ((x, a), b) in delta
                .iter_mut()
                .zip(&self.data[range.clone()])
                .zip(&self.snapshot[range])
            {
                *x = a - b;
            }
            add(r, &delta);
        }
    }
}

#[inline(always)]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

/// The step's two products. Each has a portable body and, on x86-64 CPUs with
/// AVX2 and FMA, the same body compiled for those features and picked at run
/// time. Sums keep their order, so both paths give identical bits.
mod kernels {
    use super::super::sgns::dot;
    use super::axpy;

    /// `g = C·Oᵀ` for row-major `c` (rows × d) and `o` (cols × d).
    #[inline(always)]
    fn logits_body(c: &[f64], o: &[f64], g: &mut [f64], d: usize) {
        let cols = o.len() / d;
        for (ci, gi) in c.chunks_exact(d).zip(g.chunks_exact_mut(cols)) {
            for (x, oj) in gi.iter_mut().zip(o.chunks_exact(d)) {
                *x = dot(ci, oj);
            }
        }
    }

    /// `dc = G·O` and `dout = Gᵀ·C`, accumulated into zeroed buffers.
    #[inline(always)]
    fn deltas_body(c: &[f64], o: &[f64], g: &[f64], dc: &mut [f64], dout: &mut [f64], d: usize) {
        let cols = o.len() / d;
        for ((ci, gi), dci) in c.chunks_exact(d).zip(g.chunks_exact(cols)).zip(dc.chunks_exact_mut(d)) {
            for ((&gij, oj), doj) in gi.iter().zip(o.chunks_exact(d)).zip(dout.chunks_exact_mut(d)) {
                if gij != 0.0 {
                    axpy(dci, gij, oj);
                    axpy(doj, gij, ci);
                }
            }
        }
    }

    #[cfg(target_arch = "x86_64")]
    fn wide() -> bool {
        std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn logits_wide(c: &[f64], o: &[f64], g: &mut [f64], d: usize) {
        logits_body(c, o, g, d)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn deltas_wide(c: &[f64], o: &[f64], g: &[f64], dc: &mut [f64], dout: &mut [f64], d: usize) {
        deltas_body(c, o, g, dc, dout, d)
    }

    pub(super) fn logits(c: &[f64], o: &[f64], g: &mut [f64], d: usize) {
        #[cfg(target_arch = "x86_64")]
        if wide() {
            // SAFETY: the features were just detected on this CPU
            return unsafe { logits_wide(c, o, g, d) };
        }
        logits_body(c, o, g, d)
    }

    pub(super) fn deltas(c: &[f64], o: &[f64], g: &[f64], dc: &mut [f64], dout: &mut [f64], d: usize) {
        #[cfg(target_arch = "x86_64")]
        if wide() {
            // SAFETY: as above
            return unsafe { deltas_wide(c, o, g, dc, dout, d) };
        }
        deltas_body(c, o, g, dc, dout, d)
    }
}

/// What one lifetime did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LifetimeStats {
    /// Summed negative log-likelihood over every (context, target) pair.
    pub loss: f64,
    pub pairs: u64,
    /// `(rows, cols)` of the logit matrix at each step.
    pub shapes: Vec<(usize, usize)>,
}

/// Context and negative buffers of one worker for one lifetime.
#[derive(Debug, Clone)]
pub struct WorkerBuffers {
    ctx: RowBuffer,
    neg: RowBuffer,
}

impl WorkerBuffers {
    pub fn load(store: &EmbeddingStore, walks: &[&[NodeId]], negatives: &[NodeId]) -> Self {
        let d = store.dim;
        let ctx = RowBuffer::load(
            walks.iter().flat_map(|w| w.iter()).map(|&v| store.row(v)),
            |r, out| store.phi_in.read_row(r, out),
            d,
        );
        let neg = RowBuffer::load(
            negatives.iter().map(|&v| store.row(v)),
            |r, out| store.phi_out.read_row(r, out),
            d,
        );
        Self { ctx, neg }
    }

    /// Change accumulated for `v`'s input vector since loading.
    pub fn context_delta(&self, store: &EmbeddingStore, v: NodeId) -> Option<Vec<f64>> {
        self.ctx.delta(store.row(v))
    }

    /// Change accumulated for `v`'s buffered output vector since loading.
    pub fn negative_delta(&self, store: &EmbeddingStore, v: NodeId) -> Option<Vec<f64>> {
        self.neg.delta(store.row(v))
    }

    /// Trains `walks` in lockstep with window radius `w` and `k` negatives per
    /// step. `negatives` holds `k · (longest walk)` nodes.
    pub fn run(
        &mut self,
        store: &EmbeddingStore,
        walks: &[&[NodeId]],
        negatives: &[NodeId],
        k: usize,
        w: usize,
        lr: f64,
    ) -> LifetimeStats {
        let d = store.dim;
        let steps = walks.iter().map(|w| w.len()).max().unwrap_or(0);
        assert!(negatives.len() >= k * steps, "need k negatives per step");
        let walk_slots: Vec<Vec<usize>> = walks
            .iter()
            .map(|walk| walk.iter().map(|&v| self.ctx.slot[&store.row(v)]).collect())
            .collect();
        let neg_slots: Vec<usize> = negatives[..k * steps]
            .iter()
            .map(|&v| self.neg.slot[&store.row(v)])
            .collect();
        let mut stats = LifetimeStats::default();
        // per-step scratch
        let mut owners: Vec<usize> = Vec::new();
        let mut ctx_slots: Vec<usize> = Vec::new();
        let mut targets: Vec<NodeId> = Vec::new();
        let (mut c, mut o, mut g, mut dc, mut dout) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for t in 0..steps {
            owners.clear();
            ctx_slots.clear();
            targets.clear();
            for (walk, slots) in walks.iter().zip(&walk_slots).filter(|(walk, _)| t < walk.len()) {
                let lo = t.saturating_sub(w);
                let hi = (t + w).min(walk.len() - 1);
                if lo == hi {
                    continue;
                }
                let window = targets.len();
                targets.push(walk[t]);
                for (j, &s) in slots.iter().enumerate().take(hi + 1).skip(lo) {
                    if j != t {
                        owners.push(window);
                        ctx_slots.push(s);
                    }
                }
            }
            if targets.is_empty() {
                continue;
            }
            let negs = &negatives[t * k..(t + 1) * k];
            let step_neg_slots = &neg_slots[t * k..(t + 1) * k];
            let (rows, nt) = (ctx_slots.len(), targets.len());
            let cols = nt + k;
            stats.shapes.push((rows, cols));

            // C: the windows' context rows; O: targets from the global matrix,
            // then the buffered negatives
            c.resize(rows * d, 0.0);
            for (i, &s) in ctx_slots.iter().enumerate() {
                c[i * d..(i + 1) * d].copy_from_slice(self.ctx.get(s));
            }
            o.resize(cols * d, 0.0);
            for (j, &v) in targets.iter().enumerate() {
                store.phi_out.read_row(store.row(v), &mut o[j * d..(j + 1) * d]);
            }
            for (j, &s) in step_neg_slots.iter().enumerate() {
                o[(nt + j) * d..(nt + j + 1) * d].copy_from_slice(self.neg.get(s));
            }
            g.resize(rows * cols, 0.0);
            kernels::logits(&c[..rows * d], &o[..cols * d], &mut g[..rows * cols], d);

            // G = lr·(label − σ(C·Oᵀ)), zero where a negative is the row's own target
            for i in 0..rows {
                let own = owners[i];
                let own_target = targets[own];
                for j in 0..cols {
                    let col_node = if j < nt { targets[j] } else { negs[j - nt] };
                    let positive = j == own;
                    let x = &mut g[i * cols + j];
                    if !positive && col_node == own_target {
                        *x = 0.0;
                    } else {
                        // one exp serves σ and both log-terms:
                        // −log σ(x) = max(−x, 0) + ln(1 + e^{−|x|})
                        let e = (-x.abs()).exp();
                        let sig = if *x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                        let soft = e.ln_1p();
                        if positive {
                            stats.loss += (-*x).max(0.0) + soft;
                            *x = lr * (1.0 - sig);
                        } else {
                            stats.loss += x.max(0.0) + soft;
                            *x = -lr * sig;
                        }
                    }
                }
            }
            stats.pairs += rows as u64;

            // ΔC = G·O and ΔO = Gᵀ·C at the step's starting values
            dc.clear();
            dc.resize(rows * d, 0.0);
            dout.clear();
            dout.resize(cols * d, 0.0);
            kernels::deltas(&c[..rows * d], &o[..cols * d], &g[..rows * cols], &mut dc, &mut dout, d);
            for (i, &s) in ctx_slots.iter().enumerate() {
                axpy(self.ctx.get_mut(s), 1.0, &dc[i * d..(i + 1) * d]);
            }
            for (j, &v) in targets.iter().enumerate() {
                store.phi_out.add_row(store.row(v), &dout[j * d..(j + 1) * d]);
            }
            for (j, &s) in step_neg_slots.iter().enumerate() {
                axpy(self.neg.get_mut(s), 1.0, &dout[(nt + j) * d..(nt + j + 1) * d]);
            }
        }
        stats
    }

    /// Adds the accumulated deltas to the global matrices.
    pub fn flush(self, store: &EmbeddingStore) {
        self.ctx.flush(|r, delta| store.phi_in.add_row(r, delta));
        self.neg.flush(|r, delta| store.phi_out.add_row(r, delta));
    }
}

/// Loads buffers, trains the batch, and flushes.
pub fn train_multiwindow(
    store: &EmbeddingStore,
    walks: &[&[NodeId]],
    negatives: &[NodeId],
    k: usize,
    w: usize,
    lr: f64,
) -> LifetimeStats {
    let mut buffers = WorkerBuffers::load(store, walks, negatives);
    let stats = buffers.run(store, walks, negatives, k, w, lr);
    buffers.flush(store);
    stats
}
