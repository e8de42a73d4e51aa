//! Link prediction: hold out edges, score node pairs by embedding dot products,
//! and report the area under the ROC curve.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{CsrGraph, GraphError, NodeId};
use crate::learner::Embeddings;
use crate::rng;
use crate::sampler::CommReport;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    Fraction(f64),
    #[error("found only {found} of {needed} non-edges after {tries} draws; graph too dense")]
    TooDense { needed: usize, found: usize, tries: usize },
    #[error("AUC needs at least one positive and one negative score")]
    Empty,
    #[error("node {node} has no embedding ({count} vectors)")]
    Coverage { node: NodeId, count: usize },
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct LinkSplit {
    pub train_graph: CsrGraph,
    pub pos_test: Vec<(NodeId, NodeId)>,
    pub neg_test: Vec<(NodeId, NodeId)>,
    pub split_seed: u64,
}

/// Draws per requested non-edge before giving up.
const NON_EDGE_TRIES: usize = 100;

/// Moves `⌊fraction·E⌋` uniformly chosen edges into the positive test set and
/// draws as many uniform non-edges of `g` as negatives. Self-loops stay in
/// training. Direction is respected for directed graphs.
pub fn split_edges(g: &CsrGraph, fraction: f64, seed: u64) -> Result<LinkSplit, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::Fraction(fraction));
    }
    let mut rng = rng::stream(seed, rng::stage::SPLIT);
    let (loops, mut candidates): (Vec<_>, Vec<_>) = g.edges().partition(|&(u, v, _)| u == v);
    candidates.shuffle(&mut rng);
    let k = (fraction * candidates.len() as f64).floor() as usize;
    let pos_test: Vec<(NodeId, NodeId)> = candidates[..k].iter().map(|&(u, v, _)| (u, v)).collect();

    let kept: Vec<_> = candidates[k..].iter().chain(&loops).collect();
    let edges: Vec<(NodeId, NodeId)> = kept.iter().map(|&&(u, v, _)| (u, v)).collect();
    let weights: Option<Vec<f64>> = g.is_weighted().then(|| kept.iter().map(|e| e.2).collect());
    let train_graph = CsrGraph::from_edges(g.node_count(), &edges, weights.as_deref(), g.is_directed())?;

    let n = g.node_count();
    let key = |u: NodeId, v: NodeId| if g.is_directed() || u < v { (u, v) } else { (v, u) };
    let mut seen = HashSet::with_capacity(k);
    let mut neg_test = Vec::with_capacity(k);
    let budget = NON_EDGE_TRIES * k;
    let mut tries = 0;
    while neg_test.len() < k && tries < budget && n >= 2 {
        tries += 1;
        let u = rng.random_range(0..n) as NodeId;
        let v = rng.random_range(0..n) as NodeId;
        if u != v && !g.has_edge(u, v) && seen.insert(key(u, v)) {
            neg_test.push((u, v));
        }
    }
    if neg_test.len() < k {
        return Err(EvalError::TooDense {
            needed: k,
            found: neg_test.len(),
            tries,
        });
    }
    Ok(LinkSplit {
        train_graph,
        pos_test,
        neg_test,
        split_seed: seed,
    })
}

/// `P(pos > neg) + ½·P(tie)` via the Mann-Whitney rank sum with average ranks
/// for ties.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64, EvalError> {
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum += mean_rank * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (p, q) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

pub fn pair_scores(emb: &Embeddings, pairs: &[(NodeId, NodeId)]) -> Result<Vec<f64>, EvalError> {
    let count = emb.node_count();
    pairs
        .iter()
        .map(|&(u, v)| match [u, v].into_iter().find(|&x| x as usize >= count) {
            Some(node) => Err(EvalError::Coverage { node, count }),
            None => Ok(emb.dot(u, v)),
        })
        .collect()
}

pub fn auc_score(emb: &Embeddings, split: &LinkSplit) -> Result<f64, EvalError> {
    auc(&pair_scores(emb, &split.pos_test)?, &pair_scores(emb, &split.neg_test)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub trials: Vec<TrialResult>,
    pub mean: f64,
    /// Sample standard deviation; zero for one trial.
    pub std: f64,
}

impl EvalSummary {
    pub fn from_trials(trials: Vec<TrialResult>) -> Result<Self, EvalError> {
        if trials.is_empty() {
            return Err(EvalError::NoTrials);
        }
        let n = trials.len() as f64;
        let mean = trials.iter().map(|t| t.auc).sum::<f64>() / n;
        let std = if trials.len() > 1 {
            (trials.iter().map(|t| (t.auc - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self { trials, mean, std })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "trial,seed,auc")?;
        for t in &self.trials {
            writeln!(out, "{},{},{}", t.trial, t.seed, t.auc)?;
        }
        writeln!(out, "mean,,{}", self.mean)?;
        writeln!(out, "std,,{}", self.std)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()
    }
}

/// `n` trial seeds: the base seed itself, then seeds mixed from it.
pub fn trial_seeds(base_seed: u64, n: usize) -> Vec<u64> {
    (0..n)
        .map(|i| {
            if i == 0 {
                base_seed
            } else {
                rng::mix(base_seed, i as u64)
            }
        })
        .collect()
}

/// Runs `trial` once per seed, concurrently, and summarizes the AUCs.
pub fn repeat_eval<F, E>(seeds: &[u64], trial: F) -> Result<EvalSummary, E>
where
    F: Fn(u64) -> Result<f64, E> + Sync,
    E: From<EvalError> + Send,
{
    if seeds.is_empty() {
        return Err(EvalError::NoTrials.into());
    }
    let results = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| trial(seed).map(|auc| TrialResult { trial: i, seed, auc }))
        .collect::<Result<Vec<_>, E>>()?;
    Ok(EvalSummary::from_trials(results)?)
}

/// Totals of a communication report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommSummary {
    pub machines: usize,
    pub supersteps: u64,
    pub messages: u64,
    pub bytes: u64,
    pub steps: u64,
    /// Largest machine's share of bytes over the mean share; 1 is perfectly even.
    pub byte_imbalance: f64,
}

impl CommSummary {
    pub fn of(report: &CommReport) -> Self {
        let machines = report.machines.len();
        let bytes = report.total_bytes();
        let max = report.machines.iter().map(|m| m.bytes_sent).max().unwrap_or(0);
        let byte_imbalance = if bytes == 0 {
            1.0
        } else {
            max as f64 * machines as f64 / bytes as f64
        };
        Self {
            machines,
            supersteps: report.supersteps,
            messages: report.total_messages(),
            bytes,
            steps: report.total_steps(),
            byte_imbalance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::{prop, prop_assert, proptest};

    fn auc_brute(pos: &[f64], neg: &[f64]) -> f64 {
        let mut wins = 0.0;
        for p in pos {
            for q in neg {
                wins += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        wins / (pos.len() * neg.len()) as f64
    }

    fn hundred_edges() -> CsrGraph {
        synth::gnm(60, 100, 3)
    }

    #[test]
    fn half_of_a_hundred_edges_are_held_out() {
        let g = hundred_edges();
        assert_eq!(g.edges().count(), 100);
        let s = split_edges(&g, 0.5, 1).unwrap();
        assert_eq!(s.pos_test.len(), 50);
        assert_eq!(s.neg_test.len(), 50);
        assert_eq!(s.train_graph.edges().count(), 50);
    }

    #[test]
    fn held_out_edges_leave_training_and_negatives_are_non_edges() {
        for directed in [false, true] {
            let base = synth::gnm(80, 300, 9);
            let edges: Vec<_> = base.edges().map(|(u, v, _)| (u, v)).collect();
            let g = CsrGraph::from_edges(80, &edges, None, directed).unwrap();
            let s = split_edges(&g, 0.3, 4).unwrap();
            for &(u, v) in &s.pos_test {
                assert!(g.has_edge(u, v) && !s.train_graph.has_edge(u, v));
            }
            let mut seen = HashSet::new();
            for &(u, v) in &s.neg_test {
                assert!(u != v && !g.has_edge(u, v));
                assert!(seen.insert(if directed { (u, v) } else { (u.min(v), u.max(v)) }));
            }
            // everything else stays
            let train: usize = s.train_graph.edges().count();
            assert_eq!(train + s.pos_test.len(), g.edges().count());
        }
    }

    #[test]
    fn tiny_fraction_keeps_the_graph() {
        let g = hundred_edges();
        let s = split_edges(&g, 1e-9, 1).unwrap();
        assert!(s.pos_test.is_empty() && s.neg_test.is_empty());
        assert_eq!(s.train_graph, g);
    }

    #[test]
    fn complete_graph_is_too_dense() {
        let g = synth::cliques(1, 10);
        assert!(matches!(split_edges(&g, 0.5, 0), Err(EvalError::TooDense { .. })));
        assert!(matches!(split_edges(&g, 1.0, 0), Err(EvalError::Fraction(_))));
    }

    #[test]
    fn split_is_seeded() {
        let g = hundred_edges();
        let a = split_edges(&g, 0.5, 7).unwrap();
        let b = split_edges(&g, 0.5, 7).unwrap();
        let c = split_edges(&g, 0.5, 8).unwrap();
        assert_eq!(a.pos_test, b.pos_test);
        assert_eq!(a.neg_test, b.neg_test);
        assert_ne!(a.pos_test, c.pos_test);
    }

    #[test]
    fn perfect_and_chance_rankings() {
        assert_eq!(auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(auc(&[1.0], &[1.0]).unwrap(), 0.5);
        assert!(matches!(auc(&[], &[1.0]), Err(EvalError::Empty)));
        let mut r = rng::stream(3, 3);
        let aucs: Vec<f64> = (0..50)
            .map(|_| {
                let pos: Vec<f64> = (0..200).map(|_| r.random()).collect();
                let neg: Vec<f64> = (0..200).map(|_| r.random()).collect();
                auc(&pos, &neg).unwrap()
            })
            .collect();
        let mean = aucs.iter().sum::<f64>() / 50.0;
        assert!((mean - 0.5).abs() < 0.05);
    }

    #[test]
    fn random_embeddings_score_near_chance() {
        let g = synth::barabasi_albert(300, 3, 2);
        let mut r = rng::stream(5, 5);
        let mut total = 0.0;
        for trial in 0..50 {
            let s = split_edges(&g, 0.5, trial).unwrap();
            let data: Vec<f64> = (0..300 * 8).map(|_| r.random_range(-1.0..1.0)).collect();
            let emb = Embeddings { dim: 8, data };
            total += auc_score(&emb, &s).unwrap();
        }
        assert!((total / 50.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn coverage_is_checked() {
        let emb = Embeddings {
            dim: 2,
            data: vec![0.0; 4],
        };
        assert!(matches!(
            pair_scores(&emb, &[(0, 2)]),
            Err(EvalError::Coverage { node: 2, count: 2 })
        ));
    }

    #[test]
    fn repeat_summarizes() {
        let one = repeat_eval(&[3], |_| Ok::<_, EvalError>(0.7)).unwrap();
        assert_eq!((one.mean, one.std), (0.7, 0.0));
        let f = |s: u64| Ok::<_, EvalError>((s % 100) as f64 / 100.0);
        let seeds = trial_seeds(9, 5);
        assert_eq!(seeds[0], 9);
        let a = repeat_eval(&seeds, f).unwrap();
        let b = repeat_eval(&seeds, f).unwrap();
        assert_eq!(a, b);
        let xs: Vec<f64> = a.trials.iter().map(|t| t.auc).collect();
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((a.mean - m).abs() < 1e-15 && (a.std - v.sqrt()).abs() < 1e-15);
        assert!(matches!(repeat_eval(&[], f), Err(EvalError::NoTrials)));
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 + 2);
    }

    proptest! {
        #[test]
        fn rank_auc_equals_brute_force(
            pos in prop::collection::vec(-5i32..5, 1..40),
            neg in prop::collection::vec(-5i32..5, 1..40),
        ) {
            let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
            let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
            let a = auc(&pos, &neg).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - auc_brute(&pos, &neg)).abs() < 1e-12);
            let flip = |x: &[f64]| x.iter().map(|s| -s).collect::<Vec<_>>();
            prop_assert!((auc(&flip(&pos), &flip(&neg)).unwrap() - (1.0 - a)).abs() < 1e-12);
        }
    }
}
