//! Sorted-set intersection.
//!
//! Both operands must be strictly ascending. When the operand sizes differ the
//! smaller list gallops (exponential probe, then binary search) through the
//! larger one; equal sizes use a plain linear merge.

use super::{GraphError, NodeId};

/// Calls `visit` for every element common to `a` and `b`, in ascending order.
pub fn intersect_with<F: FnMut(NodeId)>(a: &[NodeId], b: &[NodeId], mut visit: F) {
    debug_assert!(is_strictly_sorted(a), "left operand is not strictly sorted");
    debug_assert!(is_strictly_sorted(b), "right operand is not strictly sorted");
    if a.is_empty() || b.is_empty() {
        return;
    }
    if a.len() == b.len() {
        merge(a, b, visit);
        return;
    }
    let (small, large) = if a.len() < b.len() { (a, b) } else { (b, a) };
    let mut base = 0usize;
    for &target in small {
        if base >= large.len() {
            break;
        }
        // gallop: find the first window [base + offset/2, base + offset] that can hold target
        let mut offset = 1usize;
        while base + offset < large.len() && large[base + offset] < target {
            offset *= 2;
        }
        let lo = base + offset / 2;
        let hi = (base + offset + 1).min(large.len());
        base = lo + large[lo..hi].partition_point(|&x| x < target);
        if base < large.len() && large[base] == target {
            visit(target);
            base += 1;
        }
    }
}

fn merge<F: FnMut(NodeId)>(a: &[NodeId], b: &[NodeId], mut visit: F) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                visit(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Intersection of two strictly sorted id lists.
pub fn intersect_galloping(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    intersect_with(a, b, |x| out.push(x));
    out
}

/// Size of the intersection of two strictly sorted id lists.
pub fn intersect_count(a: &[NodeId], b: &[NodeId]) -> usize {
    let mut n = 0;
    intersect_with(a, b, |_| n += 1);
    n
}

/// Like [`intersect_galloping`] but validates the sortedness contract in every build.
pub fn checked_intersect(a: &[NodeId], b: &[NodeId]) -> Result<Vec<NodeId>, GraphError> {
    if !is_strictly_sorted(a) || !is_strictly_sorted(b) {
        return Err(GraphError::Unsorted);
    }
    Ok(intersect_galloping(a, b))
}

pub fn is_strictly_sorted(xs: &[NodeId]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn merge_oracle(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
        let mut out = Vec::new();
        merge(a, b, |x| out.push(x));
        out
    }

    #[test]
    fn small_examples() {
        assert_eq!(intersect_galloping(&[1, 3, 5], &[2, 3, 4, 5, 9]), vec![3, 5]);
        assert_eq!(intersect_galloping(&[1, 3, 5], &[]), Vec::<NodeId>::new());
        assert_eq!(intersect_galloping(&[], &[1]), Vec::<NodeId>::new());
        let x = [0, 2, 7, 11, 40];
        assert_eq!(intersect_galloping(&x, &x), x.to_vec());
        assert_eq!(intersect_count(&[9], &[1, 2, 3, 4, 5, 6, 7, 8, 9]), 1);
        assert_eq!(intersect_count(&[0], &[1, 2, 3, 4, 5, 6, 7, 8, 9]), 0);
        assert_eq!(intersect_count(&[10], &[1, 2, 3, 4, 5, 6, 7, 8, 9]), 0);
    }

    #[test]
    fn unsorted_is_rejected() {
        assert!(matches!(checked_intersect(&[3, 1], &[1]), Err(GraphError::Unsorted)));
        assert!(matches!(checked_intersect(&[1, 1], &[1]), Err(GraphError::Unsorted)));
    }

    fn sorted_set() -> impl Strategy<Value = Vec<NodeId>> {
        prop::collection::btree_set(0u32..500, 0..120).prop_map(|s: BTreeSet<NodeId>| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn matches_linear_merge(a in sorted_set(), b in sorted_set()) {
            prop_assert_eq!(intersect_galloping(&a, &b), merge_oracle(&a, &b));
            prop_assert_eq!(intersect_count(&b, &a), merge_oracle(&a, &b).len());
        }
    }
}
