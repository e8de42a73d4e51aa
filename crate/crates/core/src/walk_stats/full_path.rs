//! Full-path walk statistics: the walker keeps its entire path and recomputes
//! entropy and R² from scratch at every step, O(L) per step. This is the
//! baseline whose messages grow with the walk length.

use super::{entropy_full, r_squared_from_moments, terminate_on, TerminationRule};
use crate::graph::NodeId;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FullPathWalk {
    pub path: Vec<NodeId>,
    /// `H` of every prefix, `entropies[i]` for the prefix of length `i + 1`.
    pub entropies: Vec<f64>,
}

impl FullPathWalk {
    pub fn new(source: NodeId) -> Self {
        Self {
            path: vec![source],
            entropies: vec![0.0],
        }
    }

    /// Rebuilds the prefix entropies of a received path.
    pub fn from_path(path: &[NodeId]) -> Self {
        let mut w = Self {
            path: Vec::with_capacity(path.len()),
            entropies: Vec::with_capacity(path.len()),
        };
        for &v in path {
            w.push(v);
        }
        w
    }

    pub fn push(&mut self, v: NodeId) {
        self.path.push(v);
        let h = entropy_full(&self.path).expect("path is non-empty");
        self.entropies.push(h);
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        *self.entropies.last().unwrap_or(&0.0)
    }

    /// R² of the `(H_i, i)` series from centered sums.
    pub fn r_squared(&self) -> Option<f64> {
        let n = self.entropies.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean_h = self.entropies.iter().sum::<f64>() / nf;
        let mean_l = (nf + 1.0) / 2.0;
        let (mut cov, mut var_h, mut var_l) = (0.0, 0.0, 0.0);
        for (i, &h) in self.entropies.iter().enumerate() {
            let dh = h - mean_h;
            let dl = (i + 1) as f64 - mean_l;
            cov += dh * dl;
            var_h += dh * dh;
            var_l += dl * dl;
        }
        r_squared_from_moments(cov / nf, var_h / nf, var_l / nf)
    }

    pub fn should_terminate(&self, rule: &TerminationRule) -> bool {
        terminate_on(self.path.len() as u32, self.r_squared(), rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tracks_prefix_entropies() {
        let mut w = FullPathWalk::new(0);
        w.push(1);
        w.push(0);
        assert_eq!(w.len(), 3);
        assert_abs_diff_eq!(w.entropies[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.entropy(), 0.918_295_834_054_489_6, epsilon = 1e-12);
        assert!(w.r_squared().is_some());
    }

    #[test]
    fn constant_entropy_is_undefined() {
        let mut w = FullPathWalk::new(4);
        for _ in 0..5 {
            w.push(4);
        }
        assert_eq!(w.r_squared(), None);
        assert!(!w.should_terminate(&TerminationRule::default()));
    }
}
