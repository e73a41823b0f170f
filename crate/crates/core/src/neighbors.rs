//! Exact nearest-neighbour queries.
//!
//! Everything here is brute force over squared distances; the metric's
//! units are applied only to the returned distances. Each query point is
//! processed independently, so results do not depend on the worker count.
//! Ties go to the lower row index.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensorset::{squared_distance, DistanceMetric, PointSet};

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborResult {
    /// Per query point, the distance to its selected neighbour.
    pub distances: Vec<f64>,
    /// Row index of that neighbour.
    pub indices: Vec<usize>,
}

#[inline]
fn key_cmp(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The k-th smallest `(squared distance, index)` from row `i` to every
/// other row.
fn kth_for_row(ps: &PointSet, i: usize, k: usize, best: &mut Vec<(f64, usize)>) -> (f64, usize) {
    best.clear();
    let x = ps.row(i);
    for (j, y) in ps.rows().enumerate() {
        if j == i {
            continue;
        }
        let cand = (squared_distance(x, y), j);
        if best.len() == k {
            if key_cmp(cand, best[k - 1]) != Ordering::Less {
                continue;
            }
            best.pop();
        }
        let pos = best.partition_point(|&b| key_cmp(b, cand) == Ordering::Less);
        best.insert(pos, cand);
    }
    best[k - 1]
}

/// k-th nearest neighbour of every point among the *other* points of the
/// already feature-mapped set `ps`, as squared distances.
pub(crate) fn kth_nn_within_squared(ps: &PointSet, k: usize) -> Result<NeighborResult> {
    if k == 0 {
        return Err(Error::Value("neighbour rank k must be >= 1".into()));
    }
    if ps.len() <= k {
        return Err(Error::InsufficientPoints {
            needed: k + 1,
            got: ps.len(),
        });
    }
    let (distances, indices) = (0..ps.len())
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(k + 1),
            |best, i| kth_for_row(ps, i, k, best),
        )
        .unzip();
    Ok(NeighborResult { distances, indices })
}

/// For each point, the distance to its k-th nearest *other* point.
pub fn kth_nn_within(ps: &PointSet, k: usize, metric: &DistanceMetric) -> Result<NeighborResult> {
    let mapped = metric.prepare(ps)?;
    let mut res = kth_nn_within_squared(&mapped, k)?;
    res.distances
        .iter_mut()
        .for_each(|d| *d = metric.from_squared(*d));
    Ok(res)
}

pub(crate) fn nn_cross_squared(queries: &PointSet, refs: &PointSet) -> Result<NeighborResult> {
    if refs.is_empty() {
        return Err(Error::EmptyDataset("reference set is empty".into()));
    }
    queries.check_same_dim(refs)?;
    let (distances, indices) = queries
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0usize);
            for (j, r) in refs.rows().enumerate() {
                let d2 = squared_distance(q, r);
                if d2 < best.0 {
                    best = (d2, j);
                }
            }
            best
        })
        .unzip();
    Ok(NeighborResult { distances, indices })
}

/// For each query, the distance to the nearest reference point. A query
/// that coincides with a reference point gets distance 0.
pub fn nn_cross(
    queries: &PointSet,
    refs: &PointSet,
    metric: &DistanceMetric,
) -> Result<NeighborResult> {
    if refs.is_empty() {
        return Err(Error::EmptyDataset("reference set is empty".into()));
    }
    queries.check_same_dim(refs)?;
    let q = metric.prepare(queries)?;
    let r = metric.prepare(refs)?;
    let mut res = nn_cross_squared(&q, &r)?;
    res.distances
        .iter_mut()
        .for_each(|d| *d = metric.from_squared(*d));
    Ok(res)
}
