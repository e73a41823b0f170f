use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PointSet;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Maps raw points into the space where distances are measured.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "snake_case",
    rename_all_fields = "camelCase"
)]
pub enum FeatureMap {
    #[default]
    Identity,
    /// Gaussian random projection, entries `N(0, 1/target_dim)`, drawn
    /// from `seed` in row-major order.
    RandomProjection { target_dim: usize, seed: u64 },
    /// `y = transform * (x - mean)`, `transform` given as rows.
    AffineWhitening {
        mean: Vec<f64>,
        transform: Vec<Vec<f64>>,
    },
}

impl FeatureMap {
    /// ZCA whitening fitted to `ps`: the transform is `cov^{-1/2}`, with
    /// eigenvalues below `1e-12` treated as `1e-12`.
    pub fn whitening_for(ps: &PointSet) -> Result<FeatureMap> {
        let moments = crate::metrics::moment_summary(ps)?;
        let d = ps.dim();
        let cov = DMatrix::from_fn(d, d, |i, j| moments.covariance[i][j]);
        let eig = SymmetricEigen::new(cov);
        let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(1e-12).sqrt());
        let t =
            &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        Ok(FeatureMap::AffineWhitening {
            mean: moments.mean,
            transform: (0..d).map(|i| t.row(i).iter().copied().collect()).collect(),
        })
    }

    /// Output dimension for `input_dim`-dimensional input.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            FeatureMap::Identity => input_dim,
            FeatureMap::RandomProjection { target_dim, .. } => *target_dim,
            FeatureMap::AffineWhitening { transform, .. } => transform.len(),
        }
    }

    fn check_input(&self, input_dim: usize) -> Result<()> {
        match self {
            FeatureMap::Identity => Ok(()),
            FeatureMap::RandomProjection { target_dim, .. } => {
                if *target_dim == 0 {
                    return Err(Error::Dimension("projection target dimension is 0".into()));
                }
                Ok(())
            }
            FeatureMap::AffineWhitening { mean, transform } => {
                if mean.len() != input_dim {
                    return Err(Error::Dimension(format!(
                        "whitening mean has length {}, points have dimension {input_dim}",
                        mean.len()
                    )));
                }
                if transform.is_empty() {
                    return Err(Error::Dimension("whitening transform has no rows".into()));
                }
                if let Some(bad) = transform.iter().find(|r| r.len() != input_dim) {
                    return Err(Error::Dimension(format!(
                        "whitening transform row has length {}, expected {input_dim}",
                        bad.len()
                    )));
                }
                Ok(())
            }
        }
    }

    fn projection_matrix(target_dim: usize, seed: u64, input_dim: usize) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let scale = 1.0 / (target_dim as f64).sqrt();
        (0..target_dim * input_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect()
    }

    pub fn apply_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ps = PointSet::from_flat(x.to_vec(), x.len())?;
        Ok(self.apply(&ps)?.as_flat().to_vec())
    }

    /// Applies the map to every row, keeping source tags.
    pub fn apply(&self, ps: &PointSet) -> Result<PointSet> {
        let d = ps.dim();
        self.check_input(d)?;
        let data = match self {
            FeatureMap::Identity => return Ok(ps.clone()),
            FeatureMap::RandomProjection { target_dim, seed } => {
                let w = Self::projection_matrix(*target_dim, *seed, d);
                let mut out = Vec::with_capacity(ps.len() * target_dim);
                for row in ps.rows() {
                    for wr in w.chunks_exact(d) {
                        out.push(wr.iter().zip(row).map(|(a, b)| a * b).sum());
                    }
                }
                out
            }
            FeatureMap::AffineWhitening { mean, transform } => {
                let mut centred = vec![0.0; d];
                let mut out = Vec::with_capacity(ps.len() * transform.len());
                for row in ps.rows() {
                    for (c, (x, m)) in centred.iter_mut().zip(row.iter().zip(mean)) {
                        *c = x - m;
                    }
                    for tr in transform {
                        out.push(tr.iter().zip(&centred).map(|(a, b)| a * b).sum());
                    }
                }
                out
            }
        };
        PointSet::new(data, self.output_dim(d), ps.sources().to_vec())
    }
}
