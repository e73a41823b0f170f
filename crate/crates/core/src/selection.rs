//! Entropy-motivated subset selection from a candidate pool.
//!
//! Greedy selection is farthest-point sampling: after a seeded random first
//! pick, each step adds the candidate whose distance to the selected set is
//! largest. The threshold decay filter is its soft counterpart: scan the
//! pool in index order admitting anything farther than `tau` from every
//! member, and shrink `tau` by `alpha` after a pass that admits nothing.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tensorset::{squared_distance, DistanceMetric, PointSet, SourceTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "snake_case",
    rename_all_fields = "camelCase"
)]
pub enum SelectionKind {
    Greedy,
    /// `tau0 = 0, alpha = 0` is the degenerate filter that admits everything.
    ThresholdDecay {
        tau0: f64,
        alpha: f64,
    },
    Random,
}

impl SelectionKind {
    pub fn validate(&self) -> Result<()> {
        if let SelectionKind::ThresholdDecay { tau0, alpha } = *self {
            if !tau0.is_finite() || tau0 < 0.0 {
                return Err(Error::Config(format!(
                    "tau0 must be finite and >= 0, got {tau0}"
                )));
            }
            if tau0 == 0.0 {
                if alpha != 0.0 {
                    return Err(Error::Config(
                        "tau0 = 0 is only allowed together with alpha = 0".into(),
                    ));
                }
            } else if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::Config(format!(
                    "alpha must lie in (0, 1], got {alpha}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionPolicy {
    pub kind: SelectionKind,
    pub seed: u64,
    #[serde(default)]
    pub metric: DistanceMetric,
    /// Overrides the seeded first pick (greedy and threshold decay only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_index: Option<usize>,
}

impl SelectionPolicy {
    pub fn new(kind: SelectionKind, seed: u64) -> Self {
        SelectionPolicy {
            kind,
            seed,
            metric: DistanceMetric::default(),
            initial_index: None,
        }
    }

    pub fn with_metric(mut self, metric: DistanceMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_initial(mut self, index: usize) -> Self {
        self.initial_index = Some(index);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionResult {
    /// Selected pool rows, in the order they were chosen.
    pub indices: Vec<usize>,
    pub source_proportions: BTreeMap<SourceTag, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passes: Option<usize>,
}

/// Fraction of `indices` carrying each source tag.
pub fn source_proportions(pool: &PointSet, indices: &[usize]) -> BTreeMap<SourceTag, f64> {
    let mut counts: BTreeMap<SourceTag, usize> = BTreeMap::new();
    for &i in indices {
        *counts.entry(pool.source(i)).or_default() += 1;
    }
    let n = indices.len() as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

fn check_size(pool: &PointSet, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Value("selection size must be >= 1".into()));
    }
    if n > pool.len() {
        return Err(Error::InsufficientPoints {
            needed: n,
            got: pool.len(),
        });
    }
    Ok(())
}

fn initial_pick(pool: &PointSet, policy: &SelectionPolicy) -> Result<usize> {
    match policy.initial_index {
        Some(i) if i >= pool.len() => Err(Error::Value(format!(
            "initial index {i} outside pool of {}",
            pool.len()
        ))),
        Some(i) => Ok(i),
        None => Ok(rng_from_seed(policy.seed).random_range(0..pool.len())),
    }
}

/// Running squared distance from every candidate to the selected set.
struct MinDistances<'a> {
    pool: &'a PointSet,
    min_d2: Vec<f64>,
    selected: Vec<bool>,
    order: Vec<usize>,
}

impl<'a> MinDistances<'a> {
    fn new(pool: &'a PointSet, capacity: usize) -> Self {
        MinDistances {
            pool,
            min_d2: vec![f64::INFINITY; pool.len()],
            selected: vec![false; pool.len()],
            order: Vec::with_capacity(capacity),
        }
    }

    fn add(&mut self, idx: usize) {
        self.selected[idx] = true;
        self.order.push(idx);
        let pool = self.pool;
        let x = pool.row(idx);
        self.min_d2.par_iter_mut().enumerate().for_each(|(j, m)| {
            let d2 = squared_distance(pool.row(j), x);
            if d2 < *m {
                *m = d2;
            }
        });
    }

    /// Unselected candidate with the largest distance; lowest index on ties.
    fn farthest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, (&d2, &sel)) in self.min_d2.iter().zip(&self.selected).enumerate() {
            if sel {
                continue;
            }
            if best.is_none_or(|(_, b)| d2 > b) {
                best = Some((j, d2));
            }
        }
        best.map(|(j, _)| j)
    }
}

pub fn select_greedy(
    pool: &PointSet,
    n: usize,
    policy: &SelectionPolicy,
) -> Result<SelectionResult> {
    check_size(pool, n)?;
    let mapped = policy.metric.prepare(pool)?;
    let mut state = MinDistances::new(&mapped, n);
    state.add(initial_pick(pool, policy)?);
    while state.order.len() < n {
        let next = state
            .farthest()
            .ok_or_else(|| Error::Internal("greedy selection ran out of candidates".into()))?;
        state.add(next);
    }
    let indices = state.order;
    Ok(SelectionResult {
        source_proportions: source_proportions(pool, &indices),
        indices,
        final_threshold: None,
        passes: None,
    })
}

pub fn select_threshold_decay(
    pool: &PointSet,
    n: usize,
    policy: &SelectionPolicy,
) -> Result<SelectionResult> {
    let (tau0, alpha) = match policy.kind {
        SelectionKind::ThresholdDecay { tau0, alpha } => (tau0, alpha),
        other => {
            return Err(Error::Config(format!(
                "threshold decay called with {other:?} policy"
            )))
        }
    };
    policy.kind.validate()?;
    check_size(pool, n)?;
    let mapped = policy.metric.prepare(pool)?;
    let metric = &policy.metric;
    let mut state = MinDistances::new(&mapped, n);
    state.add(initial_pick(pool, policy)?);

    let mut tau = tau0;
    let mut passes = 0;
    // A zero threshold filters nothing, duplicates included.
    let admits = |d: f64, tau: f64| tau == 0.0 || d > tau;
    'outer: while state.order.len() < n {
        passes += 1;
        let mut added = false;
        for j in 0..mapped.len() {
            if state.selected[j] {
                continue;
            }
            if admits(metric.from_squared(state.min_d2[j]), tau) {
                state.add(j);
                added = true;
                if state.order.len() == n {
                    break 'outer;
                }
            }
        }
        if !added {
            let next = alpha * tau;
            // alpha = 1 (or an underflowed tau) would otherwise never
            // terminate when every candidate sits within tau.
            tau = if next < tau { next } else { 0.0 };
        }
    }
    let indices = state.order;
    Ok(SelectionResult {
        source_proportions: source_proportions(pool, &indices),
        indices,
        final_threshold: Some(tau),
        passes: Some(passes),
    })
}

/// Uniform subset without replacement: the first `n` slots of a seeded
/// Fisher-Yates shuffle of `0..pool.len()`.
pub fn select_random(pool: &PointSet, n: usize, seed: u64) -> Result<SelectionResult> {
    check_size(pool, n)?;
    let mut rng = rng_from_seed(seed);
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    idx.truncate(n);
    Ok(SelectionResult {
        source_proportions: source_proportions(pool, &idx),
        indices: idx,
        final_threshold: None,
        passes: None,
    })
}

/// Dispatches on `policy.kind`.
pub fn select(pool: &PointSet, n: usize, policy: &SelectionPolicy) -> Result<SelectionResult> {
    match policy.kind {
        SelectionKind::Greedy => select_greedy(pool, n, policy),
        SelectionKind::ThresholdDecay { .. } => select_threshold_decay(pool, n, policy),
        SelectionKind::Random => select_random(pool, n, policy.seed),
    }
}
