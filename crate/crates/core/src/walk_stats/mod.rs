//! Information statistics of ongoing walks.
//!
//! A walk's entropy `H` (base 2) and the running means needed for the squared
//! Pearson correlation between `H` and the length `L` are maintained in O(1) per
//! accepted step, so a walker can carry its whole statistical state in a fixed
//! number of words. [`full_path`] recomputes the same quantities from the stored
//! path and serves as the reference implementation.

pub mod full_path;

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{CsrGraph, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("entropy of an empty path is undefined")]
    EmptyPath,
    #[error("occurrence count {count} exceeds walk length {len}")]
    CountExceedsLength { count: u64, len: u64 },
}

/// Variances at or below this are treated as zero when forming R².
pub const VARIANCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminationRule {
    pub mu: f64,
    pub min_len: u32,
    pub max_len: u32,
}

impl Default for TerminationRule {
    fn default() -> Self {
        Self {
            mu: 0.995,
            min_len: 5,
            max_len: 80,
        }
    }
}

/// Incremental walk statistics: entropy, length and the means of `H`, `L`, `HL`,
/// `H²`, `L²` over the per-step series `(H_i, i)`, `i = 1..=L`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WalkInfoState {
    pub entropy: f64,
    pub len: u32,
    pub mean_h: f64,
    pub mean_l: f64,
    pub mean_hl: f64,
    pub mean_h2: f64,
    pub mean_l2: f64,
}

impl WalkInfoState {
    /// State of a walk holding only its source node.
    pub fn start() -> Self {
        Self {
            entropy: 0.0,
            len: 1,
            mean_h: 0.0,
            mean_l: 1.0,
            mean_hl: 0.0,
            mean_h2: 0.0,
            mean_l2: 1.0,
        }
    }

    /// Appends a node that occurred `n_before` times so far.
    pub fn advance(&mut self, n_before: u64) -> Result<(), StatsError> {
        let h = entropy_step(self.entropy, n_before, self.len as u64)?;
        *self = corr_update(self, h, self.len + 1);
        Ok(())
    }

    pub fn r_squared(&self) -> Option<f64> {
        r_squared(self)
    }
}

/// `x·log2(x)` with the `0·log 0 = 0` convention.
#[inline]
fn xlog2x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Entropy (bits) of the node distribution of `path`.
pub fn entropy_full(path: &[NodeId]) -> Result<f64, StatsError> {
    if path.is_empty() {
        return Err(StatsError::EmptyPath);
    }
    let mut counts: HashMap<NodeId, u64> = HashMap::new();
    for &v in path {
        *counts.entry(v).or_default() += 1;
    }
    let len = path.len() as f64;
    let h: f64 = counts
        .values()
        .map(|&n| {
            let p = n as f64 / len;
            -p * p.log2()
        })
        .sum();
    Ok(h.max(0.0))
}

/// Entropy after appending a node whose count before the append is `n_before`
/// to a walk of length `len_before` with entropy `entropy`.
///
/// `H' = (H·L − log2 T)/(L+1)` where
/// `log2 T = L·log2 L − (L+1)·log2(L+1) + (n+1)·log2(n+1) − n·log2 n`
/// (the last two terms vanish together when the node is new).
pub fn entropy_step(entropy: f64, n_before: u64, len_before: u64) -> Result<f64, StatsError> {
    if n_before > len_before {
        return Err(StatsError::CountExceedsLength {
            count: n_before,
            len: len_before,
        });
    }
    let l = len_before as f64;
    let n = n_before as f64;
    let log_t = xlog2x(l) - xlog2x(l + 1.0) + xlog2x(n + 1.0) - xlog2x(n);
    Ok(((entropy * l - log_t) / (l + 1.0)).max(0.0))
}

/// Folds the sample `(h_new, len_new)` into the running means; `len_new` must be
/// `state.len + 1`.
pub fn corr_update(state: &WalkInfoState, h_new: f64, len_new: u32) -> WalkInfoState {
    debug_assert_eq!(len_new, state.len + 1);
    let p = len_new as f64;
    let l = len_new as f64;
    // E_p = ((p-1)·E_{p-1} + x_p)/p; exact for the integer-valued L series
    let step = |mean: f64, x: f64| ((p - 1.0) * mean + x) / p;
    WalkInfoState {
        entropy: h_new,
        len: len_new,
        mean_h: step(state.mean_h, h_new),
        mean_l: step(state.mean_l, l),
        mean_hl: step(state.mean_hl, h_new * l),
        mean_h2: step(state.mean_h2, h_new * h_new),
        mean_l2: step(state.mean_l2, l * l),
    }
}

/// Squared correlation of `H` and `L`, or `None` when undefined (fewer than two
/// samples or a zero variance).
pub fn r_squared(state: &WalkInfoState) -> Option<f64> {
    if state.len < 2 {
        return None;
    }
    let cov = state.mean_hl - state.mean_h * state.mean_l;
    let var_h = state.mean_h2 - state.mean_h * state.mean_h;
    let var_l = state.mean_l2 - state.mean_l * state.mean_l;
    r_squared_from_moments(cov, var_h, var_l)
}

pub(crate) fn r_squared_from_moments(cov: f64, var_h: f64, var_l: f64) -> Option<f64> {
    if var_h <= VARIANCE_EPS || var_l <= VARIANCE_EPS {
        return None;
    }
    Some((cov * cov / (var_h * var_l)).clamp(0.0, 1.0))
}

/// Walk termination: the hard cap always stops; past the warm-up an R² below `mu`
/// stops; an undefined R² never does.
pub fn should_terminate(state: &WalkInfoState, rule: &TerminationRule) -> bool {
    terminate_on(state.len, r_squared(state), rule)
}

pub(crate) fn terminate_on(len: u32, r2: Option<f64>, rule: &TerminationRule) -> bool {
    if len >= rule.max_len {
        return true;
    }
    len >= rule.min_len && r2.is_some_and(|r2| r2 < rule.mu)
}

/// Per-walk occurrence counts of the nodes owned by one machine.
#[derive(Debug, Clone, Default)]
pub struct LocalFrequencyList {
    counts: HashMap<NodeId, u32>,
}

impl LocalFrequencyList {
    pub fn count(&self, v: NodeId) -> u32 {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    /// Increments `v`'s count and returns the count before the increment.
    pub fn bump(&mut self, v: NodeId) -> u32 {
        let c = self.counts.entry(v).or_default();
        *c += 1;
        *c - 1
    }

    /// Sum of all counts held here.
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// Corpus-wide occurrence counts and the relative entropy between the degree
/// distribution and the occurrence distribution.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CorpusStats {
    pub ocn: Vec<u64>,
    pub total_ocn: u64,
    pub d_prev: Option<f64>,
    pub d_curr: Option<f64>,
}

impl CorpusStats {
    pub fn new(node_count: usize) -> Self {
        Self {
            ocn: vec![0; node_count],
            ..Default::default()
        }
    }

    pub fn from_walks<'a>(node_count: usize, walks: impl IntoIterator<Item = &'a [NodeId]>) -> Self {
        let mut s = Self::new(node_count);
        for w in walks {
            s.add_walk(w);
        }
        s
    }

    pub fn add_walk(&mut self, walk: &[NodeId]) {
        for &v in walk {
            self.ocn[v as usize] += 1;
        }
        self.total_ocn += walk.len() as u64;
    }

    /// Adds another machine's partial counts.
    pub fn merge(&mut self, other: &CorpusStats) {
        for (a, b) in self.ocn.iter_mut().zip(&other.ocn) {
            *a += b;
        }
        self.total_ocn += other.total_ocn;
    }

    pub fn ocn_max(&self) -> u64 {
        self.ocn.iter().copied().max().unwrap_or(0)
    }

    /// Recomputes D(p‖q) against `g` and shifts the previous value.
    pub fn record_round(&mut self, g: &CsrGraph) -> f64 {
        let d = relative_entropy(g, self);
        self.d_prev = self.d_curr;
        self.d_curr = Some(d);
        d
    }

    pub fn converged(&self, delta: f64) -> bool {
        match (self.d_curr, self.d_prev) {
            (Some(c), Some(p)) => walks_converged(c, p, delta),
            _ => false,
        }
    }
}

/// `D(p‖q) = Σ p(v)·log2(p(v)/q(v))` with `p ∝ deg`, `q ∝ ocn`; nodes that never
/// occur count as one occurrence.
pub fn relative_entropy(g: &CsrGraph, stats: &CorpusStats) -> f64 {
    let n = g.node_count();
    let deg_total: f64 = (0..n as NodeId).map(|u| g.degree(u) as f64).sum();
    if deg_total == 0.0 {
        return 0.0;
    }
    let smoothed = |c: u64| if c == 0 { 1 } else { c };
    let ocn_total: f64 = (0..n).map(|v| smoothed(stats.ocn[v]) as f64).sum();
    let d: f64 = (0..n)
        .filter(|&v| g.degree(v as NodeId) > 0)
        .map(|v| {
            let p = g.degree(v as NodeId) as f64 / deg_total;
            let q = smoothed(stats.ocn[v]) as f64 / ocn_total;
            p * (p / q).log2()
        })
        .sum();
    d.max(0.0)
}

pub fn walks_converged(d_curr: f64, d_prev: f64, delta: f64) -> bool {
    (d_curr - d_prev).abs() <= delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Direct means/variances over an explicit (H, L) series.
    fn r2_direct(series: &[(f64, f64)]) -> Option<f64> {
        let n = series.len() as f64;
        let mh = series.iter().map(|s| s.0).sum::<f64>() / n;
        let ml = series.iter().map(|s| s.1).sum::<f64>() / n;
        let cov = series.iter().map(|s| (s.0 - mh) * (s.1 - ml)).sum::<f64>() / n;
        let vh = series.iter().map(|s| (s.0 - mh).powi(2)).sum::<f64>() / n;
        let vl = series.iter().map(|s| (s.1 - ml).powi(2)).sum::<f64>() / n;
        r_squared_from_moments(cov, vh, vl)
    }

    fn state_from_series(series: &[f64]) -> WalkInfoState {
        let mut s = WalkInfoState {
            entropy: series[0],
            len: 1,
            mean_h: series[0],
            mean_l: 1.0,
            mean_hl: series[0],
            mean_h2: series[0] * series[0],
            mean_l2: 1.0,
        };
        for (i, &h) in series.iter().enumerate().skip(1) {
            s = corr_update(&s, h, i as u32 + 1);
        }
        s
    }

    #[test]
    fn entropy_full_examples() {
        assert_eq!(entropy_full(&[7]).unwrap(), 0.0);
        assert_abs_diff_eq!(entropy_full(&[1, 2, 1, 2]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(entropy_full(&[1, 2, 3, 4]).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(entropy_full(&[]), Err(StatsError::EmptyPath));
    }

    #[test]
    fn entropy_step_examples() {
        assert_abs_diff_eq!(entropy_step(0.0, 0, 1).unwrap(), 1.0, epsilon = 1e-15);
        let h = entropy_step(1.0, 1, 2).unwrap();
        assert_abs_diff_eq!(h, entropy_full(&[0, 1, 0]).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.918_295_834_054_489_6, epsilon = 1e-12);
        assert_eq!(entropy_step(0.0, 3, 3).unwrap(), 0.0);
        assert!(entropy_step(0.0, 4, 3).is_err());
    }

    #[test]
    fn corr_update_examples() {
        let s = state_from_series(&[0.0, 1.0]);
        assert_eq!(s.mean_l, 1.5);
        assert_eq!(s.mean_h, 0.5);
        assert_eq!(s.mean_hl, 1.0);
        let s1 = WalkInfoState::start();
        assert_eq!((s1.mean_h, s1.mean_l, s1.mean_l2), (0.0, 1.0, 1.0));
        let s3 = state_from_series(&[0.0, 1.0, 1.5]);
        assert_abs_diff_eq!(s3.mean_l2, 14.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn r_squared_examples() {
        let linear: Vec<f64> = (1..=10).map(|l| 0.5 * l as f64).collect();
        assert_abs_diff_eq!(r_squared(&state_from_series(&linear)).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(r_squared(&state_from_series(&[0.0; 6])), None);
        assert_eq!(r_squared(&WalkInfoState::start()), None);
        let r2 = r_squared(&state_from_series(&[0.0, 1.0, 1.5])).unwrap();
        assert_abs_diff_eq!(r2, 0.25 / (0.25 * 7.0 / 6.75), epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 0.9643, epsilon = 1e-4);
    }

    #[test]
    fn termination_rules() {
        let rule = TerminationRule {
            mu: 0.995,
            min_len: 5,
            max_len: 80,
        };
        let mut s = WalkInfoState::start();
        s.len = 80;
        assert!(should_terminate(&s, &rule));
        // below the warm-up a low R² does not stop the walk
        let short = state_from_series(&[0.0, 1.0, 0.2]);
        assert!(short.r_squared().unwrap() < 0.995);
        assert!(!should_terminate(&short, &rule));
        // near-linear growth keeps walking
        let lin: Vec<f64> = (1..=12)
            .map(|l| 0.3 * l as f64 + if l % 2 == 0 { 0.004 } else { 0.0 })
            .collect();
        let st = state_from_series(&lin);
        let r2 = r2_direct(
            &lin.iter()
                .enumerate()
                .map(|(i, &h)| (h, i as f64 + 1.0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(r2 > 0.999);
        assert!(!should_terminate(&st, &rule));
        // undefined R² keeps walking
        assert!(!should_terminate(&state_from_series(&[0.0; 10]), &rule));
    }

    #[test]
    fn base_change_only_rescales() {
        // natural-log entropies differ by a constant factor; R² is unchanged
        let bits = [0.0, 1.0, 1.585, 1.5, 1.92, 2.25];
        let nats: Vec<f64> = bits.iter().map(|b| b * std::f64::consts::LN_2).collect();
        let a = r_squared(&state_from_series(&bits)).unwrap();
        let b = r_squared(&state_from_series(&nats)).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn relative_entropy_examples() {
        let g = CsrGraph::from_edges(2, &[(0, 1)], None, false).unwrap();
        let mut s = CorpusStats::new(2);
        s.ocn = vec![3, 1];
        s.total_ocn = 4;
        let expect = 0.5 * 2f64.log2() + 0.5 * (2.0f64 / 3.0).log2();
        assert_abs_diff_eq!(relative_entropy(&g, &s), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(relative_entropy(&g, &s), 0.2075, epsilon = 1e-4);
        s.ocn = vec![5, 5];
        assert_abs_diff_eq!(relative_entropy(&g, &s), 0.0, epsilon = 1e-15);
        // unseen nodes are smoothed, keeping D finite
        s.ocn = vec![4, 0];
        assert!(relative_entropy(&g, &s).is_finite());
    }

    #[test]
    fn convergence_check() {
        assert!(walks_converged(0.100, 0.100, 0.001));
        assert!(!walks_converged(0.105, 0.100, 0.001));
        let mut s = CorpusStats::new(1);
        assert!(!s.converged(0.001));
        s.d_curr = Some(0.5);
        assert!(!s.converged(0.001));
        s.d_prev = Some(0.5);
        assert!(s.converged(0.001));
    }

    #[test]
    fn local_frequency_list() {
        let mut f = LocalFrequencyList::default();
        assert_eq!(f.bump(3), 0);
        assert_eq!(f.bump(3), 1);
        assert_eq!(f.bump(4), 0);
        assert_eq!(f.count(3), 2);
        assert_eq!(f.total(), 3);
        assert_eq!(f.distinct(), 2);
    }

    proptest! {
        #[test]
        fn incremental_matches_full(path in prop::collection::vec(0u32..12, 1..90)) {
            let mut state = WalkInfoState::start();
            let mut counts = HashMap::new();
            counts.insert(path[0], 1u64);
            let mut series = vec![(0.0, 1.0)];
            for (i, &v) in path.iter().enumerate().skip(1) {
                let c = counts.entry(v).or_insert(0);
                state.advance(*c).unwrap();
                *c += 1;
                let h = entropy_full(&path[..=i]).unwrap();
                prop_assert!((state.entropy - h).abs() <= 1e-9);
                prop_assert!(state.entropy <= (state.len as f64).log2() + 1e-9);
                prop_assert_eq!(state.mean_l, (state.len as f64 + 1.0) / 2.0);
                series.push((h, (i + 1) as f64));
                match (state.r_squared(), r2_direct(&series)) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9),
                    (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
                }
            }
        }

        #[test]
        fn relative_entropy_non_negative(
            edges in prop::collection::vec((0u32..15, 0u32..15), 1..60),
            ocn in prop::collection::vec(0u64..50, 15),
        ) {
            let g = CsrGraph::from_edges(15, &edges, None, false).unwrap();
            let mut s = CorpusStats::new(15);
            s.total_ocn = ocn.iter().sum();
            s.ocn = ocn;
            prop_assert!(relative_entropy(&g, &s) >= 0.0);
        }
    }
}
