//! Scalar dataset and model metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{kth_nn_within, nn_cross};
use crate::specfun::{digamma_difference, log_unit_ball_volume};
use crate::tensorset::{DistanceMetric, PointSet};

/// Nearest-neighbour distances below this are clamped to it (and counted
/// as duplicates) before taking logs.
pub const EPSILON_FLOOR: f64 = 1e-12;

/// Eigenvalues of a covariance may dip this far below zero from rounding.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Result of the Kozachenko-Leonenko estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntropyReport {
    /// Estimated differential entropy in nats.
    pub estimate: f64,
    pub gamma: usize,
    /// Points whose gamma-NN distance was clamped to [`EPSILON_FLOOR`].
    pub duplicate_count: usize,
    /// Sum of `ln eps_gamma(x)` over all points, after clamping.
    pub log_distance_sum: f64,
    pub size: usize,
    pub dim: usize,
}

impl EntropyReport {
    /// `psi(n) - psi(gamma) + ln c_d + (d / n) * log_distance_sum`.
    pub fn reconstruct(&self) -> Result<f64> {
        Ok(digamma_difference(self.size, self.gamma)?
            + log_unit_ball_volume(self.dim)?
            + (self.dim as f64 / self.size as f64) * self.log_distance_sum)
    }
}

/// Kozachenko-Leonenko estimate of differential entropy from gamma-th
/// nearest-neighbour distances. `d` is the dimension after the metric's
/// feature map.
pub fn kl_entropy(ps: &PointSet, gamma: usize, metric: &DistanceMetric) -> Result<EntropyReport> {
    if gamma == 0 {
        return Err(Error::Value("gamma must be >= 1".into()));
    }
    if ps.len() < gamma + 1 {
        return Err(Error::InsufficientPoints {
            needed: gamma + 1,
            got: ps.len(),
        });
    }
    let mapped = metric.prepare(ps)?;
    let nn = kth_nn_within(
        &mapped,
        gamma,
        &DistanceMetric {
            kind: metric.kind,
            feature_map: None,
        },
    )?;
    let mut duplicate_count = 0;
    let mut log_distance_sum = 0.0;
    for &eps in &nn.distances {
        let eps = if eps < EPSILON_FLOOR {
            duplicate_count += 1;
            EPSILON_FLOOR
        } else {
            eps
        };
        log_distance_sum += eps.ln();
    }
    let mut report = EntropyReport {
        estimate: f64::NAN,
        gamma,
        duplicate_count,
        log_distance_sum,
        size: ps.len(),
        dim: mapped.dim(),
    };
    report.estimate = report.reconstruct()?;
    Ok(report)
}

/// Mean distance from each generated point to its nearest training point.
/// Zero means every generated point is a copy of a training point.
pub fn generalization_score(
    generated: &PointSet,
    training: &PointSet,
    metric: &DistanceMetric,
) -> Result<f64> {
    if generated.is_empty() {
        return Err(Error::EmptyDataset("generated set is empty".into()));
    }
    if training.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    generated.check_same_dim(training)?;
    let nn = nn_cross(generated, training, metric)?;
    Ok(mean(&nn.distances))
}

/// Mean nearest-neighbour distance within a set.
pub fn mnnd(ps: &PointSet, metric: &DistanceMetric) -> Result<f64> {
    if ps.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: ps.len(),
        });
    }
    Ok(mean(&kth_nn_within(ps, 1, metric)?.distances))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample mean and MLE (1/n) covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub trace_cov: f64,
}

impl MomentSummary {
    /// Builds a summary from explicit moments, checking shape, symmetry and
    /// positive semi-definiteness.
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Dimension("moments need dimension >= 1".into()));
        }
        if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!("covariance is not {d}x{d}")));
        }
        if mean
            .iter()
            .chain(covariance.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Value("non-finite moment".into()));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[i][j], covariance[j][i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Numerical(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let summary = MomentSummary {
            trace_cov: (0..d).map(|i| covariance[i][i]).sum(),
            mean,
            covariance,
        };
        let min_eig = summary.eigen().eigenvalues.min();
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::Numerical(format!(
                "covariance has eigenvalue {min_eig:e}"
            )));
        }
        Ok(summary)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.covariance[i][j])
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.covariance_matrix())
    }
}

pub fn moment_summary(ps: &PointSet) -> Result<MomentSummary> {
    if ps.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: ps.len(),
        });
    }
    let d = ps.dim();
    let n = ps.len() as f64;
    let mut mean = vec![0.0; d];
    for row in ps.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = vec![vec![0.0; d]; d];
    let mut centred = vec![0.0; d];
    for row in ps.rows() {
        for ((c, x), m) in centred.iter_mut().zip(row).zip(&mean) {
            *c = x - m;
        }
        for i in 0..d {
            for j in i..d {
                cov[i][j] += centred[i] * centred[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(MomentSummary {
        trace_cov: (0..d).map(|i| cov[i][i]).sum(),
        mean,
        covariance: cov,
    })
}

/// Symmetric square root of a PSD matrix, clamping tiny negative
/// eigenvalues to zero.
fn psd_sqrt(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m);
    let mut roots = DVector::zeros(eig.eigenvalues.len());
    for (r, &l) in roots.iter_mut().zip(eig.eigenvalues.iter()) {
        if l < -PSD_TOLERANCE {
            return Err(Error::Numerical(format!("matrix has eigenvalue {l:e}")));
        }
        *r = l.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Squared 2-Wasserstein (Fréchet) distance between the Gaussians with the
/// given moments:
/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})`.
///
/// The trace of `(S_a S_b)^{1/2}` is taken from the eigenvalues of the
/// symmetric matrix `S_a^{1/2} S_b S_a^{1/2}`.
pub fn frechet_gaussian_distance(a: &MomentSummary, b: &MomentSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "moments of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let root_a = psd_sqrt(a.covariance_matrix())?;
    let inner = &root_a * b.covariance_matrix() * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let mut cross = 0.0;
    for &l in SymmetricEigen::new(inner).eigenvalues.iter() {
        if l < -PSD_TOLERANCE {
            return Err(Error::Numerical(format!(
                "covariance product has eigenvalue {l:e}"
            )));
        }
        cross += l.max(0.0).sqrt();
    }
    Ok((mean_term + a.trace_cov + b.trace_cov - 2.0 * cross).max(0.0))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "sequences of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("constant sequence".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
