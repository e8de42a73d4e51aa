//! Skip-Gram negative-sampling objective for one (context, target) pair:
//! `ℓ = log σ(c·t) + Σ_k log σ(−c·n_k)`, maximized by gradient ascent.

use super::store::EmbeddingStore;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Four independent partial sums so the loop vectorizes.
#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn pair_log_likelihood(ctx: &[f64], target: &[f64], negs: &[&[f64]]) -> f64 {
    log_sigmoid(dot(ctx, target)) + negs.iter().map(|n| log_sigmoid(-dot(ctx, n))).sum::<f64>()
}

/// Gradient of [`pair_log_likelihood`] with respect to every vector involved.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub ctx: Vec<f64>,
    pub target: Vec<f64>,
    pub negs: Vec<Vec<f64>>,
}

pub fn pair_gradient(ctx: &[f64], target: &[f64], negs: &[&[f64]]) -> PairGradient {
    let d = ctx.len();
    let mut g_ctx = vec![0.0; d];
    let g = 1.0 - sigmoid(dot(ctx, target));
    for i in 0..d {
        g_ctx[i] += g * target[i];
    }
    let g_target = ctx.iter().map(|&c| g * c).collect();
    let g_negs = negs
        .iter()
        .map(|n| {
            let g = -sigmoid(dot(ctx, n));
            for i in 0..d {
                g_ctx[i] += g * n[i];
            }
            ctx.iter().map(|&c| g * c).collect()
        })
        .collect();
    PairGradient {
        ctx: g_ctx,
        target: g_target,
        negs: g_negs,
    }
}

/// One ascent step of size `lr` on the pair, all gradients taken at the current
/// parameters and applied together. Negatives equal to the target row are
/// skipped. Returns the pair's negative log-likelihood before the step.
pub fn sgns_pair_update(store: &EmbeddingStore, ctx_row: usize, target_row: usize, neg_rows: &[usize], lr: f64) -> f64 {
    let negs: Vec<usize> = neg_rows.iter().copied().filter(|&r| r != target_row).collect();
    let c = store.phi_in.row(ctx_row);
    let t = store.phi_out.row(target_row);
    let nv: Vec<Vec<f64>> = negs.iter().map(|&r| store.phi_out.row(r)).collect();
    let nrefs: Vec<&[f64]> = nv.iter().map(Vec::as_slice).collect();
    let loss = -pair_log_likelihood(&c, &t, &nrefs);
    let g = pair_gradient(&c, &t, &nrefs);
    let scale = |v: &[f64]| v.iter().map(|x| lr * x).collect::<Vec<_>>();
    store.phi_in.add_row(ctx_row, &scale(&g.ctx));
    store.phi_out.add_row(target_row, &scale(&g.target));
    for (&r, gn) in negs.iter().zip(&g.negs) {
        store.phi_out.add_row(r, &scale(gn));
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::walk_stats::CorpusStats;
    use rand::Rng;

    fn store(n: usize, d: usize, seed: u64) -> EmbeddingStore {
        let stats = CorpusStats {
            ocn: vec![1; n],
            total_ocn: n as u64,
            ..Default::default()
        };
        let s = EmbeddingStore::build(&stats, d, seed).unwrap();
        let mut r = rng::stream(seed, 99);
        for row in 0..n {
            let v: Vec<f64> = (0..d).map(|_| r.random_range(-0.5..0.5)).collect();
            s.phi_out.write_row(row, &v);
        }
        s
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((log_sigmoid(2.0) - sigmoid(2.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_step_changes_nothing() {
        let s = store(6, 4, 1);
        let (a, b) = (s.phi_in.to_vec(), s.phi_out.to_vec());
        sgns_pair_update(&s, 0, 1, &[2, 3, 4], 0.0);
        assert_eq!(s.phi_in.to_vec(), a);
        assert_eq!(s.phi_out.to_vec(), b);
    }

    #[test]
    fn repeated_positive_updates_saturate() {
        let s = store(2, 8, 3);
        for _ in 0..3000 {
            sgns_pair_update(&s, 0, 1, &[], 0.5);
        }
        assert!(sigmoid(dot(&s.phi_in.row(0), &s.phi_out.row(1))) > 0.99);
    }

    #[test]
    fn negatives_equal_to_target_are_skipped() {
        let a = store(4, 3, 2);
        let b = a.clone();
        sgns_pair_update(&a, 0, 1, &[1, 2], 0.1);
        sgns_pair_update(&b, 0, 1, &[2], 0.1);
        assert_eq!(a.phi_in.to_vec(), b.phi_in.to_vec());
        assert_eq!(a.phi_out.to_vec(), b.phi_out.to_vec());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::stream(7, 0);
        for _ in 0..50 {
            let d = r.random_range(1..=16);
            let k = r.random_range(0..=5);
            let mut v = |scale: f64| (0..d).map(|_| r.random_range(-scale..scale)).collect::<Vec<f64>>();
            let c = v(1.0);
            let t = v(1.0);
            let negs: Vec<Vec<f64>> = (0..k).map(|_| v(1.0)).collect();
            let nrefs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            let g = pair_gradient(&c, &t, &nrefs);
            let h = 1e-6;
            for i in 0..d {
                let f = |dc: f64| {
                    let mut c2 = c.clone();
                    c2[i] += dc;
                    pair_log_likelihood(&c2, &t, &nrefs)
                };
                let fd = (f(h) - f(-h)) / (2.0 * h);
                assert!(
                    (fd - g.ctx[i]).abs() <= 1e-5 * fd.abs().max(1e-3),
                    "{fd} vs {}",
                    g.ctx[i]
                );
            }
        }
    }
}
