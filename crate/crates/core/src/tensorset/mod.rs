//! The point-set data model shared by every other module.

mod feature;
mod io;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use feature::FeatureMap;
pub use io::{
    load_pointset, read_csv, read_rawbin, save_pointset, write_csv, write_rawbin, Format,
};

/// Where a point came from: the real dataset or a synthetic generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceTag {
    Real,
    /// Output of the model trained at the given iteration (always >= 1).
    Synthetic(u32),
}

impl SourceTag {
    pub fn synthetic(iteration: u32) -> Result<Self> {
        if iteration == 0 {
            return Err(Error::Value(
                "synthetic iteration index must be >= 1".into(),
            ));
        }
        Ok(SourceTag::Synthetic(iteration))
    }

    pub fn is_real(self) -> bool {
        matches!(self, SourceTag::Real)
    }
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTag::Real => f.write_str("real"),
            SourceTag::Synthetic(k) => write!(f, "syn{k}"),
        }
    }
}

impl FromStr for SourceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("real") {
            return Ok(SourceTag::Real);
        }
        let digits = s
            .strip_prefix("syn")
            .ok_or_else(|| Error::Format(format!("unknown source tag {s:?}")))?;
        let k: u32 = digits
            .parse()
            .map_err(|_| Error::Format(format!("unknown source tag {s:?}")))?;
        SourceTag::synthetic(k)
    }
}

impl Serialize for SourceTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourceTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An `n x d` matrix of finite `f64` values, stored row-major, with one
/// [`SourceTag`] per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    sources: Vec<SourceTag>,
    dim: usize,
}

impl PointSet {
    pub fn new(data: Vec<f64>, dim: usize, sources: Vec<SourceTag>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("point dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Format(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if sources.len() != n {
            return Err(Error::Format(format!(
                "{} source tags for {n} points",
                sources.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Value(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        if sources.contains(&SourceTag::Synthetic(0)) {
            return Err(Error::Value(
                "synthetic iteration index must be >= 1".into(),
            ));
        }
        Ok(PointSet { data, sources, dim })
    }

    /// All points tagged [`SourceTag::Real`].
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        let n = data.len().checked_div(dim).unwrap_or(0);
        Self::new(data, dim, vec![SourceTag::Real; n])
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::EmptyDataset("no rows".into()))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Format(format!(
                    "row {i} has {} columns, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim)
    }

    /// Points on the real line.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), 1)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(Vec::new(), dim, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn sources(&self) -> &[SourceTag] {
        &self.sources
    }

    pub fn source(&self, i: usize) -> SourceTag {
        self.sources[i]
    }

    /// Same matrix, every point re-tagged.
    pub fn with_source(mut self, tag: SourceTag) -> Self {
        self.sources.iter_mut().for_each(|s| *s = tag);
        self
    }

    /// Rows at `indices`, in that order. Panics on out-of-range indices.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut sources = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            sources.push(self.sources[i]);
        }
        PointSet {
            data,
            sources,
            dim: self.dim,
        }
    }

    /// The first `n` rows (or all of them if there are fewer).
    pub fn head(&self, n: usize) -> PointSet {
        let n = n.min(self.len());
        PointSet {
            data: self.data[..n * self.dim].to_vec(),
            sources: self.sources[..n].to_vec(),
            dim: self.dim,
        }
    }

    /// Appends `other`'s rows and tags.
    pub fn extend(&mut self, other: &PointSet) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Dimension(format!(
                "cannot append {}-d points to a {}-d set",
                other.dim, self.dim
            )));
        }
        self.data.extend_from_slice(&other.data);
        self.sources.extend_from_slice(&other.sources);
        Ok(())
    }

    /// Multiplies every coordinate by `s`.
    pub fn scaled(&self, s: f64) -> Result<PointSet> {
        PointSet::new(
            self.data.iter().map(|v| v * s).collect(),
            self.dim,
            self.sources.clone(),
        )
    }

    pub(crate) fn check_same_dim(&self, other: &PointSet) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "point sets have dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Euclidean,
    SquaredEuclidean,
}

/// `kappa(x, y)`: a Euclidean-family distance measured after an optional
/// feature map.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistanceMetric {
    pub kind: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_map: Option<FeatureMap>,
}

impl DistanceMetric {
    pub fn euclidean() -> Self {
        Self::default()
    }

    pub fn squared_euclidean() -> Self {
        DistanceMetric {
            kind: MetricKind::SquaredEuclidean,
            feature_map: None,
        }
    }

    pub fn with_feature_map(mut self, map: FeatureMap) -> Self {
        self.feature_map = match map {
            FeatureMap::Identity => None,
            other => Some(other),
        };
        self
    }

    /// Maps `ps` into the space where distances are measured. Borrows when
    /// there is nothing to do.
    pub fn prepare<'a>(&self, ps: &'a PointSet) -> Result<Cow<'a, PointSet>> {
        match &self.feature_map {
            None | Some(FeatureMap::Identity) => Ok(Cow::Borrowed(ps)),
            Some(map) => Ok(Cow::Owned(map.apply(ps)?)),
        }
    }

    /// Turns a squared Euclidean distance between mapped points into this
    /// metric's units.
    #[inline]
    pub fn from_squared(&self, d2: f64) -> f64 {
        match self.kind {
            MetricKind::Euclidean => d2.sqrt(),
            MetricKind::SquaredEuclidean => d2,
        }
    }

    /// Distance between two raw (unmapped) points.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "vectors of length {} and {}",
                x.len(),
                y.len()
            )));
        }
        let d2 = match &self.feature_map {
            None | Some(FeatureMap::Identity) => squared_distance(x, y),
            Some(map) => {
                let fx = map.apply_vector(x)?;
                let fy = map.apply_vector(y)?;
                squared_distance(&fx, &fy)
            }
        };
        Ok(self.from_squared(d2))
    }
}

/// Sum of squared coordinate differences, accumulated left to right.
#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let t = a - b;
            t * t
        })
        .sum()
}

pub fn apply_feature_map(ps: &PointSet, map: &FeatureMap) -> Result<PointSet> {
    map.apply(ps)
}
