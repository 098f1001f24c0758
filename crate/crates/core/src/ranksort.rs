//! Distributed depth ranking.
//!
//! Every worker sorts its own `(depth, id)` cells, the master folds the sorted
//! runs together with a two-way merge as they arrive, and the merged order is
//! turned into a hash index `id -> global rank` that workers read in O(1).
//!
//! Cells are ordered by depth, then by id. The id tie-break makes the order
//! total, so the merged result does not depend on arrival order.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("cell {id} has non-finite depth {vd}")]
    NonFinite { id: u32, vd: f64 },
    #[error("input not sorted at position {position}")]
    Unsorted { position: usize },
    #[error("duplicate vertex id {0}")]
    DuplicateId(u32),
    #[error("vertex id {id} out of range for {total} cells")]
    IdOutOfRange { id: u32, total: usize },
    #[error("rank lookup [{offset}, {offset}+{count}) exceeds {total} entries")]
    RangeOverflow {
        offset: usize,
        count: usize,
        total: usize,
    },
}

/// One vertex depth tagged with its original global vertex id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthCell {
    pub vd: f64,
    pub id: u32,
}

impl DepthCell {
    pub fn new(vd: f64, id: u32) -> Self {
        DepthCell { vd, id }
    }
}

/// Total order on cells: depth ascending, then id ascending.
#[inline]
pub fn cell_order(a: &DepthCell, b: &DepthCell) -> Ordering {
    a.vd
        .partial_cmp(&b.vd)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

/// A worker's depth cells; ids start at `id_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDepthArray {
    pub cells: Vec<DepthCell>,
    pub id_offset: u32,
    pub worker_id: u16,
}

impl LocalDepthArray {
    pub fn from_depths(worker_id: u16, id_offset: u32, depths: impl IntoIterator<Item = f64>) -> Self {
        let cells = depths
            .into_iter()
            .enumerate()
            .map(|(i, vd)| DepthCell::new(vd, id_offset + i as u32))
            .collect();
        LocalDepthArray {
            cells,
            id_offset,
            worker_id,
        }
    }

    pub fn sort(&mut self) -> Result<(), RankError> {
        sort_in_place(&mut self.cells)
    }
}

fn sort_in_place(cells: &mut [DepthCell]) -> Result<(), RankError> {
    if let Some(c) = cells.iter().find(|c| !c.vd.is_finite()) {
        return Err(RankError::NonFinite { id: c.id, vd: c.vd });
    }
    cells.sort_unstable_by(cell_order);
    Ok(())
}

pub fn local_depth_sort(mut cells: Vec<DepthCell>) -> Result<Vec<DepthCell>, RankError> {
    sort_in_place(&mut cells)?;
    Ok(cells)
}

fn check_sorted(cells: &[DepthCell]) -> Result<(), RankError> {
    match cells
        .windows(2)
        .position(|w| cell_order(&w[0], &w[1]) == Ordering::Greater)
    {
        Some(i) => Err(RankError::Unsorted { position: i + 1 }),
        None => Ok(()),
    }
}

fn merge_into(acc: &[DepthCell], incoming: &[DepthCell], out: &mut Vec<DepthCell>) {
    out.clear();
    out.reserve(acc.len() + incoming.len());
    let (mut i, mut j) = (0, 0);
    while i < acc.len() && j < incoming.len() {
        if cell_order(&acc[i], &incoming[j]) != Ordering::Greater {
            out.push(acc[i]);
            i += 1;
        } else {
            out.push(incoming[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&acc[i..]);
    out.extend_from_slice(&incoming[j..]);
}

/// Stable merge of two sorted runs.
pub fn twoway_merge(acc: &[DepthCell], incoming: &[DepthCell]) -> Result<Vec<DepthCell>, RankError> {
    check_sorted(acc)?;
    check_sorted(incoming)?;
    let mut out = Vec::new();
    merge_into(acc, incoming, &mut out);
    Ok(out)
}

/// Master-side accumulator that merges sorted runs on arrival.
///
/// Both buffers are kept between frames, so steady-state merging allocates
/// nothing.
#[derive(Debug, Default)]
pub struct MergeBuffer {
    merged: Vec<DepthCell>,
    scratch: Vec<DepthCell>,
}

impl MergeBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.merged.clear();
    }

    pub fn absorb(&mut self, incoming: &[DepthCell]) -> Result<(), RankError> {
        check_sorted(incoming)?;
        if self.merged.is_empty() {
            self.merged.extend_from_slice(incoming);
            return Ok(());
        }
        merge_into(&self.merged, incoming, &mut self.scratch);
        std::mem::swap(&mut self.merged, &mut self.scratch);
        Ok(())
    }

    pub fn merged(&self) -> &[DepthCell] {
        &self.merged
    }
}

/// Global rank of every vertex, indexed by vertex id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HashIndex {
    ranks: Vec<u32>,
}

impl HashIndex {
    /// Wraps a rank array, checking that it is a permutation of `0..len`.
    pub fn from_ranks(ranks: Vec<u32>) -> Result<Self, RankError> {
        let n = ranks.len();
        let mut seen = vec![false; n];
        for &r in &ranks {
            let slot = seen.get_mut(r as usize).ok_or(RankError::IdOutOfRange {
                id: r,
                total: n,
            })?;
            if *slot {
                return Err(RankError::DuplicateId(r));
            }
            *slot = true;
        }
        Ok(HashIndex { ranks })
    }

    /// Wraps a rank array produced by [`HashIndex::rebuild`] elsewhere, skipping the check.
    pub fn from_trusted(ranks: Vec<u32>) -> Self {
        HashIndex { ranks }
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn into_ranks(self) -> Vec<u32> {
        self.ranks
    }

    pub fn total_points(&self) -> usize {
        self.ranks.len()
    }

    /// Largest rank, or 0 for an empty index.
    pub fn rank_max(&self) -> u32 {
        self.ranks.len().saturating_sub(1) as u32
    }

    /// Rebuilds this index from `merged` in place, reusing the allocation.
    pub fn rebuild(&mut self, merged: &[DepthCell]) -> Result<(), RankError> {
        const UNSET: u32 = u32::MAX;
        let n = merged.len();
        self.ranks.clear();
        self.ranks.resize(n, UNSET);
        for (rank, cell) in merged.iter().enumerate() {
            let slot = self
                .ranks
                .get_mut(cell.id as usize)
                .ok_or(RankError::IdOutOfRange { id: cell.id, total: n })?;
            if *slot != UNSET {
                return Err(RankError::DuplicateId(cell.id));
            }
            *slot = rank as u32;
        }
        Ok(())
    }

    /// Ranks of the `count` vertices starting at global id `id_offset`.
    pub fn lookup_global_ranks(&self, id_offset: usize, count: usize) -> Result<&[u32], RankError> {
        let end = id_offset
            .checked_add(count)
            .filter(|&e| e <= self.ranks.len())
            .ok_or(RankError::RangeOverflow {
                offset: id_offset,
                count,
                total: self.ranks.len(),
            })?;
        Ok(&self.ranks[id_offset..end])
    }
}

/// `ranks[cell.id] = position of cell in merged`.
pub fn build_hash_index(merged: &[DepthCell]) -> Result<HashIndex, RankError> {
    check_sorted(merged)?;
    let mut index = HashIndex::default();
    index.rebuild(merged)?;
    Ok(index)
}

pub fn lookup_global_ranks(index: &HashIndex, id_offset: usize, count: usize) -> Result<&[u32], RankError> {
    index.lookup_global_ranks(id_offset, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cells(v: &[(f64, u32)]) -> Vec<DepthCell> {
        v.iter().map(|&(d, i)| DepthCell::new(d, i)).collect()
    }

    /// Selection-sort oracle: repeatedly pick the smallest (depth, id).
    fn brute_sort(mut input: Vec<DepthCell>) -> Vec<DepthCell> {
        let mut out = Vec::with_capacity(input.len());
        while !input.is_empty() {
            let mut best = 0;
            for k in 1..input.len() {
                let (a, b) = (input[k], input[best]);
                if a.vd < b.vd || (a.vd == b.vd && a.id < b.id) {
                    best = k;
                }
            }
            out.push(input.swap_remove(best));
        }
        out
    }

    /// Counting oracle: rank = number of cells strictly before this one.
    fn brute_ranks(all: &[DepthCell]) -> Vec<u32> {
        let mut ranks = vec![0; all.len()];
        for a in all {
            ranks[a.id as usize] = all
                .iter()
                .filter(|b| b.vd < a.vd || (b.vd == a.vd && b.id < a.id))
                .count() as u32;
        }
        ranks
    }

    #[test]
    fn local_sort_examples() {
        let out = local_depth_sort(cells(&[(5.0, 0), (2.0, 1), (7.0, 2)])).unwrap();
        assert_eq!(out, cells(&[(2.0, 1), (5.0, 0), (7.0, 2)]));
        let sorted = cells(&[(1.0, 3), (2.0, 0), (9.0, 1)]);
        assert_eq!(local_depth_sort(sorted.clone()).unwrap(), sorted);
        let out = local_depth_sort(cells(&[(3.0, 4), (3.0, 2)])).unwrap();
        assert_eq!(out, cells(&[(3.0, 2), (3.0, 4)]));
    }

    #[test]
    fn local_sort_rejects_nan() {
        let err = local_depth_sort(cells(&[(1.0, 0), (f64::NAN, 1)])).unwrap_err();
        assert!(matches!(err, RankError::NonFinite { id: 1, .. }));
        assert!(local_depth_sort(cells(&[(f64::INFINITY, 0)])).is_err());
    }

    #[test]
    fn merge_examples() {
        let a = cells(&[(1.0, 0), (3.0, 1)]);
        let b = cells(&[(2.0, 2), (4.0, 3)]);
        let m = twoway_merge(&a, &b).unwrap();
        let depths: Vec<f64> = m.iter().map(|c| c.vd).collect();
        assert_eq!(depths, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(twoway_merge(&[], &b).unwrap(), b);
    }

    #[test]
    fn merge_rejects_unsorted() {
        let bad = cells(&[(3.0, 0), (1.0, 1)]);
        assert_eq!(
            twoway_merge(&bad, &[]).unwrap_err(),
            RankError::Unsorted { position: 1 }
        );
        assert!(twoway_merge(&[], &bad).is_err());
        let mut buf = MergeBuffer::new();
        assert!(buf.absorb(&bad).is_err());
    }

    #[test]
    fn hash_index_examples() {
        let idx = build_hash_index(&cells(&[(2.0, 1), (5.0, 0), (7.0, 2)])).unwrap();
        assert_eq!(idx.ranks(), &[1, 0, 2]);
        assert_eq!(build_hash_index(&cells(&[(4.2, 0)])).unwrap().ranks(), &[0]);
        let ident = cells(&[(0.0, 0), (1.0, 1), (2.0, 2), (3.0, 3)]);
        assert_eq!(build_hash_index(&ident).unwrap().ranks(), &[0, 1, 2, 3]);
    }

    #[test]
    fn hash_index_rejects_bad_ids() {
        assert_eq!(
            build_hash_index(&cells(&[(1.0, 0), (2.0, 0)])).unwrap_err(),
            RankError::DuplicateId(0)
        );
        assert!(matches!(
            build_hash_index(&cells(&[(1.0, 0), (2.0, 5)])).unwrap_err(),
            RankError::IdOutOfRange { id: 5, .. }
        ));
        assert!(HashIndex::from_ranks(vec![0, 0]).is_err());
        assert!(HashIndex::from_ranks(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn lookup_examples() {
        let idx = HashIndex::from_ranks(vec![1, 0, 2]).unwrap();
        assert_eq!(lookup_global_ranks(&idx, 0, 3).unwrap(), &[1, 0, 2]);
        assert!(lookup_global_ranks(&idx, 0, 0).unwrap().is_empty());
        assert_eq!(lookup_global_ranks(&idx, 2, 1).unwrap(), &[2]);
        assert!(matches!(
            lookup_global_ranks(&idx, 2, 2),
            Err(RankError::RangeOverflow { .. })
        ));
        assert!(lookup_global_ranks(&idx, usize::MAX, 2).is_err());
    }

    #[test]
    fn local_array_ids_start_at_offset() {
        let mut arr = LocalDepthArray::from_depths(2, 10, [3.0, 1.0, 2.0]);
        let ids: Vec<u32> = arr.cells.iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![10, 11, 12]);
        arr.sort().unwrap();
        let ids: Vec<u32> = arr.cells.iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![11, 12, 10]);
    }

    fn depth_strategy() -> impl Strategy<Value = Vec<f64>> {
        // A small value pool forces plenty of ties.
        prop::collection::vec(prop_oneof![(-5i32..5).prop_map(f64::from), -1e3f64..1e3], 0..200)
    }

    proptest! {
        #[test]
        fn merge_matches_sort_of_concat(a in depth_strategy(), b in depth_strategy()) {
            let n = a.len() as u32;
            let ca = local_depth_sort(a.iter().enumerate().map(|(i, &d)| DepthCell::new(d, i as u32)).collect()).unwrap();
            let cb = local_depth_sort(b.iter().enumerate().map(|(i, &d)| DepthCell::new(d, n + i as u32)).collect()).unwrap();
            let merged = twoway_merge(&ca, &cb).unwrap();
            let mut all = ca.clone();
            all.extend_from_slice(&cb);
            prop_assert_eq!(&merged, &brute_sort(all));
            prop_assert_eq!(twoway_merge(&cb, &ca).unwrap(), merged);
        }

        #[test]
        fn distributed_ranks_match_oracle(depths in depth_strategy(), parts in 1usize..8, order_seed in any::<u64>()) {
            let all: Vec<DepthCell> = depths.iter().enumerate().map(|(i, &d)| DepthCell::new(d, i as u32)).collect();
            let chunk = (all.len() / parts).max(1);
            let mut runs: Vec<Vec<DepthCell>> = all.chunks(chunk).map(|c| local_depth_sort(c.to_vec()).unwrap()).collect();
            // Shuffle arrival order deterministically from the seed.
            let mut s = order_seed;
            for i in (1..runs.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                runs.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut buf = MergeBuffer::new();
            for r in &runs {
                buf.absorb(r).unwrap();
            }
            if all.is_empty() {
                prop_assert!(buf.merged().is_empty());
            } else {
                let idx = build_hash_index(buf.merged()).unwrap();
                prop_assert_eq!(idx.ranks(), &brute_ranks(&all)[..]);
                prop_assert!(HashIndex::from_ranks(idx.ranks().to_vec()).is_ok());
                for a in &all {
                    for b in &all {
                        if a.vd < b.vd {
                            prop_assert!(idx.ranks()[a.id as usize] < idx.ranks()[b.id as usize]);
                        }
                    }
                }
            }
        }
    }
}
