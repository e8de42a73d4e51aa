use rand::Rng;

use crate::graph::{CsrGraph, NodeId};
use crate::walk_stats::TerminationRule;

use super::SamplerError;

/// Rejection trials per step before the last candidate is taken as is.
pub const MAX_TRIALS: usize = 64;

/// Transition rule for choosing the next hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkKind {
    /// Common-neighbor and degree-ratio acceptance.
    Huge,
    /// Uniform first-order walk.
    DeepWalk,
    /// Second-order walk with return parameter `p` and in-out parameter `q`.
    Node2Vec { p: f64, q: f64 },
}

/// How walker statistics travel between machines in information-centric mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsMode {
    /// Constant-size running statistics.
    #[default]
    Incremental,
    /// The whole path, re-scanned at every step.
    FullPath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    /// Per-walk entropy/length correlation cut-off and per-round corpus
    /// relative-entropy convergence.
    InformationCentric {
        rule: TerminationRule,
        delta: f64,
        max_rounds: usize,
        mode: StatsMode,
    },
    /// `walks_per_node` rounds of walks with exactly `length` nodes (shorter only
    /// at dead ends).
    Fixed { length: u32, walks_per_node: usize },
}

impl Stopping {
    pub const DEFAULT_MAX_ROUNDS: usize = 50;

    pub fn information_centric(mu: f64, delta: f64) -> Self {
        Stopping::InformationCentric {
            rule: TerminationRule {
                mu,
                ..TerminationRule::default()
            },
            delta,
            max_rounds: Self::DEFAULT_MAX_ROUNDS,
            mode: StatsMode::Incremental,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkStrategy {
    pub kind: WalkKind,
    pub stopping: Stopping,
}

impl WalkStrategy {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if let WalkKind::Node2Vec { p, q } = self.kind {
            if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
                return Err(SamplerError::Config(format!(
                    "node2vec needs p, q > 0 (got p={p}, q={q})"
                )));
            }
        }
        match self.stopping {
            Stopping::InformationCentric {
                rule,
                delta,
                max_rounds,
                ..
            } => {
                if !(rule.mu > 0.0 && rule.mu <= 1.0) {
                    return Err(SamplerError::Config(format!("mu must be in (0, 1], got {}", rule.mu)));
                }
                if delta.is_nan() || delta <= 0.0 {
                    return Err(SamplerError::Config(format!("delta must be positive, got {delta}")));
                }
                if rule.max_len < 1 || rule.min_len > rule.max_len || max_rounds < 1 {
                    return Err(SamplerError::Config("invalid length or round limits".into()));
                }
            }
            Stopping::Fixed { length, walks_per_node } => {
                if length < 1 || walks_per_node < 1 {
                    return Err(SamplerError::Config(
                        "fixed walks need length ≥ 1 and ≥ 1 walk per node".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Whether messages carry the previous node.
    pub fn second_order(&self) -> bool {
        matches!(self.kind, WalkKind::Node2Vec { .. })
    }
}

/// Acceptance probability of moving `u → v`: `tanh(α·w(u,v))` with
/// `α = max(deg u / deg v, deg v / deg u) / (deg u − Cm(u,v))`, the denominator
/// clamped to at least 1.
pub fn huge_acceptance(g: &CsrGraph, u: NodeId, v: NodeId) -> f64 {
    let du = g.degree(u) as f64;
    let dv = g.degree(v).max(1) as f64;
    let cm = g.common_neighbors_unchecked(u, v) as f64;
    let alpha = (du / dv).max(dv / du) / (du - cm).max(1.0);
    let w = if g.is_weighted() {
        g.edge_weight(u, v).unwrap_or(1.0)
    } else {
        1.0
    };
    (alpha * w).tanh()
}

/// Unnormalized second-order weight by the distance `d_tv` between the previous
/// node `t` and the candidate `v`.
pub fn node2vec_weight(d_tv: u8, p: f64, q: f64) -> Result<f64, SamplerError> {
    match d_tv {
        0 => Ok(1.0 / p),
        1 => Ok(1.0),
        2 => Ok(1.0 / q),
        d => Err(SamplerError::Distance(d)),
    }
}

fn acceptance(g: &CsrGraph, kind: WalkKind, u: NodeId, prev: Option<NodeId>, v: NodeId) -> f64 {
    match kind {
        WalkKind::DeepWalk => 1.0,
        WalkKind::Huge => huge_acceptance(g, u, v),
        WalkKind::Node2Vec { p, q } => {
            let Some(t) = prev else { return 1.0 };
            let d = if v == t {
                0
            } else if g.has_edge(t, v) {
                1
            } else {
                2
            };
            let envelope = (1.0 / p).max(1.0).max(1.0 / q);
            node2vec_weight(d, p, q).expect("distance is at most 2") / envelope
        }
    }
}

/// Walking-backtracking: draw `v` uniformly from `N(u)` and accept it with the
/// strategy's probability, otherwise return to `u` and redraw. `None` at a dead end.
pub fn next_hop<R: Rng>(g: &CsrGraph, kind: WalkKind, u: NodeId, prev: Option<NodeId>, rng: &mut R) -> Option<NodeId> {
    let nbrs = g.neighbors(u);
    if nbrs.is_empty() {
        return None;
    }
    let mut v = nbrs[0];
    for _ in 0..MAX_TRIALS {
        v = nbrs[rng.random_range(0..nbrs.len())];
        let p = acceptance(g, kind, u, prev, v);
        if p >= 1.0 || rng.random::<f64>() < p {
            return Some(v);
        }
    }
    Some(v)
}
