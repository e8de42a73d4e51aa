use crate::graph::{intersect, NodeId};

/// Members of one partition, kept as a sorted array plus a short unsorted tail of
/// recent insertions. The tail is merged in once it outgrows `√|sorted|` (at
/// least [`MIN_PENDING`]), which keeps both insertion and queries sublinear.
#[derive(Debug, Clone, Default)]
pub struct PartitionMembers {
    sorted: Vec<NodeId>,
    pending: Vec<NodeId>,
}

const MIN_PENDING: usize = 32;

impl PartitionMembers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sorted(sorted: Vec<NodeId>) -> Self {
        debug_assert!(intersect::is_strictly_sorted(&sorted));
        Self {
            sorted,
            pending: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sorted.len() + self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, v: NodeId) {
        self.pending.push(v);
        if self.pending.len() > MIN_PENDING.max(self.sorted.len().isqrt()) {
            self.compact();
        }
    }

    fn compact(&mut self) {
        self.pending.sort_unstable();
        let mut merged = Vec::with_capacity(self.sorted.len() + self.pending.len());
        let (mut i, mut j) = (0, 0);
        while i < self.sorted.len() && j < self.pending.len() {
            if self.sorted[i] < self.pending[j] {
                merged.push(self.sorted[i]);
                i += 1;
            } else {
                merged.push(self.pending[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&self.sorted[i..]);
        merged.extend_from_slice(&self.pending[j..]);
        self.sorted = merged;
        self.pending.clear();
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.sorted.binary_search(&v).is_ok() || self.pending.contains(&v)
    }

    /// Calls `visit` for each member that also appears in the sorted list `nbrs`.
    /// Members from the sorted part come first, in ascending order.
    pub fn for_each_common<F: FnMut(NodeId)>(&self, nbrs: &[NodeId], mut visit: F) {
        intersect::intersect_with(nbrs, &self.sorted, &mut visit);
        for &p in &self.pending {
            if nbrs.binary_search(&p).is_ok() {
                visit(p);
            }
        }
    }
}
