//! Even block decomposition of polylines across workers.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("worker count {0} exceeds the provenance id space")]
    TooManyWorkers(usize),
}

/// Largest usable worker count; provenance `0xFFFF` marks background.
pub const MAX_WORKERS: usize = 0xFFFF;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub worker_id: usize,
    pub polyline_range: Range<usize>,
    /// Global id of the first vertex in this partition.
    pub vertex_id_offset: usize,
    pub vertex_count: usize,
}

/// `[n/P * k, n/P * (k+1))` for every worker but the last, which runs to `n`.
pub fn partition_bounds(n: usize, workers: usize) -> Result<Vec<Range<usize>>, PartitionError> {
    if workers == 0 {
        return Err(PartitionError::NoWorkers);
    }
    if workers > MAX_WORKERS {
        return Err(PartitionError::TooManyWorkers(workers));
    }
    let step = n / workers;
    Ok((0..workers)
        .map(|k| {
            let start = step * k;
            let end = if k + 1 == workers { n } else { step * (k + 1) };
            start..end
        })
        .collect())
}

/// Partitions polylines given their vertex counts; vertex offsets are prefix sums.
pub fn partition_ranges(vertex_counts: &[usize], workers: usize) -> Result<Vec<Partition>, PartitionError> {
    let bounds = partition_bounds(vertex_counts.len(), workers)?;
    if workers > vertex_counts.len() {
        log::info!(
            "{} workers for {} polylines: some partitions are empty",
            workers,
            vertex_counts.len()
        );
    }
    let mut offset = 0;
    Ok(bounds
        .into_iter()
        .enumerate()
        .map(|(worker_id, range)| {
            let vertex_count: usize = vertex_counts[range.clone()].iter().sum();
            let part = Partition {
                worker_id,
                polyline_range: range,
                vertex_id_offset: offset,
                vertex_count,
            };
            offset += vertex_count;
            part
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bounds_examples() {
        assert_eq!(partition_bounds(8, 4).unwrap(), vec![0..2, 2..4, 4..6, 6..8]);
        assert_eq!(partition_bounds(10, 4).unwrap(), vec![0..2, 2..4, 4..6, 6..10]);
        assert_eq!(partition_bounds(3, 4).unwrap(), vec![0..0, 0..0, 0..0, 0..3]);
        assert_eq!(partition_bounds(3, 0), Err(PartitionError::NoWorkers));
    }

    #[test]
    fn offsets_are_prefix_sums() {
        let parts = partition_ranges(&[5, 7, 9, 2], 2).unwrap();
        assert_eq!(parts[0].vertex_id_offset, 0);
        assert_eq!(parts[0].vertex_count, 12);
        assert_eq!(parts[1].vertex_id_offset, 12);
        assert_eq!(parts[1].vertex_count, 11);
    }

    proptest! {
        #[test]
        fn ranges_cover_disjointly(counts in prop::collection::vec(2usize..20, 0..60), workers in 1usize..12) {
            let parts = partition_ranges(&counts, workers).unwrap();
            prop_assert_eq!(parts.len(), workers);
            let mut next = 0;
            let mut offset = 0;
            for p in &parts {
                prop_assert_eq!(p.polyline_range.start, next);
                prop_assert!(p.polyline_range.end >= p.polyline_range.start);
                prop_assert_eq!(p.vertex_id_offset, offset);
                next = p.polyline_range.end;
                offset += p.vertex_count;
            }
            prop_assert_eq!(next, counts.len());
            prop_assert_eq!(offset, counts.iter().sum::<usize>());
        }
    }
}
