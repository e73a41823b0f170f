//! Measuring and mitigating collapse in self-consuming generative loops.
//!
//! The crate covers the full measurement pipeline used to study recursive
//! training on synthetic data:
//!
//! * [`tensorset`]: point sets with provenance tags, distance metrics,
//!   feature maps and the CSV / rawbin file formats.
//! * [`neighbors`]: exact k-th nearest-neighbour queries.
//! * [`specfun`]: digamma, log-gamma and unit-ball volumes.
//! * [`metrics`]: Kozachenko-Leonenko entropy, generalization score, MNND,
//!   moments, Fréchet-Gaussian distance and Pearson correlation.
//! * [`selection`]: greedy farthest-point selection, the threshold decay
//!   filter and a random baseline.
//! * [`generators`]: toy generative models (Gaussian MLE, GMM via EM,
//!   bootstrap with jitter).
//! * [`looper`]: the self-consuming loop itself plus trace analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod generators;
pub mod looper;
pub mod metrics;
pub mod neighbors;
pub mod seed;
pub mod selection;
pub mod specfun;
pub mod tensorset;

pub use error::{Error, Result};
pub use tensorset::{DistanceMetric, FeatureMap, MetricKind, PointSet, SourceTag};

/// Version tag written into every JSON document the crate produces.
pub const SCHEMA_VERSION: u32 = 1;
