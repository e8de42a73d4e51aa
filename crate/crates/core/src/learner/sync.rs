//! Cross-machine averaging of embedding rows.

use rand::Rng;
use serde::Serialize;

use super::store::{EmbeddingStore, SharedMatrix};
use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncMode {
    /// One sampled row per hotness block.
    #[default]
    Hotness,
    /// Every row.
    Full,
}

/// Rows averaged in one period and the bytes they represent, counted as
/// `rows·d·8·m` per matrix. Both `φ_in` and `φ_out` rows move, so the wire
/// total is twice `bytes`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SyncCost {
    pub rows: u64,
    pub bytes: u64,
}

impl SyncCost {
    fn of(rows: usize, dim: usize, machines: usize) -> Self {
        Self {
            rows: rows as u64,
            bytes: (rows * dim * 8 * machines) as u64,
        }
    }
}

impl std::ops::AddAssign for SyncCost {
    fn add_assign(&mut self, o: Self) {
        self.rows += o.rows;
        self.bytes += o.bytes;
    }
}

fn check(stores: &[EmbeddingStore]) -> Result<(), LearnError> {
    match stores.split_first() {
        Some((first, rest)) if rest.iter().any(|s| !s.compatible(first)) => Err(LearnError::Mismatch),
        _ => Ok(()),
    }
}

fn phi_in(s: &EmbeddingStore) -> &SharedMatrix {
    &s.phi_in
}

fn phi_out(s: &EmbeddingStore) -> &SharedMatrix {
    &s.phi_out
}

/// Averages the given rows of both matrices across all stores.
pub fn sync_rows(stores: &[EmbeddingStore], rows: &[usize]) {
    let Some(first) = stores.first() else { return };
    let d = first.dim;
    let m = stores.len() as f64;
    let mut acc = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for &r in rows {
        for pick in [phi_in as fn(&EmbeddingStore) -> &SharedMatrix, phi_out] {
            acc.iter_mut().for_each(|x| *x = 0.0);
            for s in stores {
                pick(s).read_row(r, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
            }
            acc.iter_mut().for_each(|x| *x /= m);
            for s in stores {
                pick(s).write_row(r, &acc);
            }
        }
    }
}

/// Samples one row from every block of corpus-occurring nodes and averages it
/// across machines. A single machine has nothing to synchronize.
pub fn sync_hotness<R: Rng + ?Sized>(stores: &[EmbeddingStore], rng: &mut R) -> Result<SyncCost, LearnError> {
    check(stores)?;
    if stores.len() < 2 {
        return Ok(SyncCost::default());
    }
    let rows: Vec<usize> = stores[0]
        .hot_blocks()
        .map(|b| rng.random_range(b.start..b.end))
        .collect();
    sync_rows(stores, &rows);
    Ok(SyncCost::of(rows.len(), stores[0].dim, stores.len()))
}

pub fn sync_full(stores: &[EmbeddingStore]) -> Result<SyncCost, LearnError> {
    check(stores)?;
    if stores.len() < 2 {
        return Ok(SyncCost::default());
    }
    let n = stores[0].node_count();
    let rows: Vec<usize> = (0..n).collect();
    sync_rows(stores, &rows);
    Ok(SyncCost::of(n, stores[0].dim, stores.len()))
}

/// Element-wise average of all machines' matrices.
pub fn merge_average(stores: &[EmbeddingStore]) -> Result<EmbeddingStore, LearnError> {
    check(stores)?;
    let first = stores.first().ok_or(LearnError::Mismatch)?;
    let m = stores.len() as f64;
    let mean = |pick: fn(&EmbeddingStore) -> &SharedMatrix| {
        let mut sum = pick(first).to_vec();
        for s in &stores[1..] {
            sum.iter_mut().zip(pick(s).to_vec()).for_each(|(a, b)| *a += b);
        }
        sum.iter_mut().for_each(|x| *x /= m);
        SharedMatrix::from_vec(first.node_count(), first.dim, &sum)
    };
    let mut out = first.clone();
    out.phi_in = mean(phi_in);
    out.phi_out = mean(phi_out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::walk_stats::CorpusStats;

    fn stores(m: usize, ocn: &[u64]) -> Vec<EmbeddingStore> {
        let stats = CorpusStats {
            ocn: ocn.to_vec(),
            total_ocn: ocn.iter().sum(),
            ..Default::default()
        };
        (0..m)
            .map(|i| EmbeddingStore::build(&stats, 3, i as u64).unwrap())
            .collect()
    }

    #[test]
    fn single_machine_is_a_no_op() {
        let s = stores(1, &[3, 2, 2, 1]);
        let before = s[0].phi_in.to_vec();
        assert_eq!(sync_hotness(&s, &mut rng::stream(0, 0)).unwrap(), SyncCost::default());
        assert_eq!(s[0].phi_in.to_vec(), before);
    }

    #[test]
    fn identical_stores_are_unchanged() {
        let a = stores(1, &[3, 2, 2, 1]).remove(0);
        let s = vec![a.clone(), a.clone()];
        sync_full(&s).unwrap();
        assert_eq!(s[0].phi_in.to_vec(), a.phi_in.to_vec());
        assert_eq!(s[1].phi_out.to_vec(), a.phi_out.to_vec());
    }

    #[test]
    fn hotness_syncs_one_row_per_block() {
        // blocks: {5,5}, {2}, {1,1,1}, and a cold {0}
        let s = stores(3, &[5, 1, 5, 2, 1, 1, 0]);
        let cost = sync_hotness(&s, &mut rng::stream(1, 1)).unwrap();
        assert_eq!(cost.rows, 3);
        assert_eq!(cost.bytes, 3 * 3 * 8 * 3);
        let agree = |r: usize| s[0].phi_in.row(r) == s[1].phi_in.row(r) && s[1].phi_in.row(r) == s[2].phi_in.row(r);
        let synced = (0..7).filter(|&r| agree(r)).count();
        assert_eq!(synced, 3);
        // the synced value is the average
        let full = sync_full(&s).unwrap();
        assert_eq!(full.rows, 7);
        assert!((0..7).all(agree));
    }

    #[test]
    fn merge_averages() {
        let s = stores(2, &[1, 1]);
        let want: Vec<f64> = s[0]
            .phi_in
            .to_vec()
            .iter()
            .zip(s[1].phi_in.to_vec())
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        let m = merge_average(&s).unwrap();
        for (a, b) in m.phi_in.to_vec().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_orderings_are_rejected() {
        let mut s = stores(2, &[2, 1]);
        s.push(stores(1, &[1, 2]).remove(0));
        assert!(matches!(
            sync_hotness(&s, &mut rng::stream(0, 0)),
            Err(LearnError::Mismatch)
        ));
    }
}
