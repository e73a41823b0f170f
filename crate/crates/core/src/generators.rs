//! Toy generative models that stand in for a trained diffusion model.
//!
//! * `GaussianMle` fits one Gaussian by maximum likelihood. Refitting on
//!   its own samples shrinks the covariance by `(m - 1) / m` per round in
//!   expectation.
//! * `GmmEm` fits a Gaussian mixture with expectation-maximisation.
//! * `BootstrapJitter` memorises the training set and resamples rows with
//!   optional isotropic Gaussian noise. With `sigma = 0` it is a pure
//!   copier.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::moment_summary;
use crate::seed::rng_from_seed;
use crate::tensorset::{squared_distance, PointSet, SourceTag};

/// Smallest eigenvalue allowed in a mixture component covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "snake_case",
    rename_all_fields = "camelCase"
)]
pub enum GeneratorKind {
    GaussianMle,
    GmmEm {
        components: usize,
        max_iters: usize,
        tol: f64,
    },
    BootstrapJitter {
        sigma: f64,
    },
}

impl GeneratorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GeneratorKind::GaussianMle => Ok(()),
            GeneratorKind::GmmEm {
                components,
                max_iters,
                tol,
            } => {
                if components == 0 {
                    return Err(Error::Config("GMM needs at least one component".into()));
                }
                if max_iters == 0 {
                    return Err(Error::Config("GMM max_iters must be >= 1".into()));
                }
                if !(tol > 0.0 && tol.is_finite()) {
                    return Err(Error::Config(format!(
                        "GMM tol must be positive, got {tol}"
                    )));
                }
                Ok(())
            }
            GeneratorKind::BootstrapJitter { sigma } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::Config(format!(
                        "bootstrap sigma must be finite and >= 0, got {sigma}"
                    )));
                }
                Ok(())
            }
        }
    }

    fn min_training_size(&self) -> usize {
        match *self {
            GeneratorKind::GaussianMle => 2,
            GeneratorKind::GmmEm { components, .. } => components,
            GeneratorKind::BootstrapJitter { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// `A` with `A A^T = covariance`; samples are `mean + A z`.
    factor: DMatrix<f64>,
}

impl GaussianComponent {
    pub fn covariance_rows(&self) -> Vec<Vec<f64>> {
        let d = self.mean.len();
        (0..d)
            .map(|i| (0..d).map(|j| self.covariance[(i, j)]).collect())
            .collect()
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let d = self.mean.len();
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        let x = &self.factor * z;
        out.extend(self.mean.iter().zip(x.iter()).map(|(m, v)| m + v));
    }
}

/// Eigen-based factor, tolerant of singular (collapsed) covariances.
fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Clamps eigenvalues at [`COVARIANCE_FLOOR`]; reports whether anything
/// changed.
fn floor_covariance(cov: DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.min() >= COVARIANCE_FLOOR {
        return (cov, false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(COVARIANCE_FLOOR));
    let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    ((&fixed + fixed.transpose()) * 0.5, true)
}

/// Per-fit EM bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Total log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    /// Number of times a component covariance had to be floored.
    pub floored: usize,
}

impl FitDiagnostics {
    /// Whether the log-likelihood never dropped by more than rounding noise.
    pub fn is_monotone(&self) -> bool {
        self.log_likelihood
            .windows(2)
            .all(|w| w[1] - w[0] >= -1e-9 * w[0].abs().max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Gaussian(GaussianComponent),
    Mixture {
        weights: Vec<f64>,
        components: Vec<GaussianComponent>,
    },
    Bootstrap {
        training: PointSet,
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedGenerator {
    pub spec: GeneratorSpec,
    pub model: FittedModel,
    pub diagnostics: Option<FitDiagnostics>,
}

pub fn fit(spec: &GeneratorSpec, training: &PointSet) -> Result<FittedGenerator> {
    spec.kind.validate()?;
    let needed = spec.kind.min_training_size();
    if training.len() < needed {
        return Err(Error::InsufficientPoints {
            needed,
            got: training.len(),
        });
    }
    let (model, diagnostics) = match spec.kind {
        GeneratorKind::GaussianMle => (FittedModel::Gaussian(fit_gaussian(training)?), None),
        GeneratorKind::GmmEm {
            components,
            max_iters,
            tol,
        } => {
            let (weights, comps, diag) = fit_gmm(training, components, max_iters, tol, spec.seed)?;
            (
                FittedModel::Mixture {
                    weights,
                    components: comps,
                },
                Some(diag),
            )
        }
        GeneratorKind::BootstrapJitter { sigma } => (
            FittedModel::Bootstrap {
                training: training.clone(),
                sigma,
            },
            None,
        ),
    };
    Ok(FittedGenerator {
        spec: *spec,
        model,
        diagnostics,
    })
}

fn fit_gaussian(training: &PointSet) -> Result<GaussianComponent> {
    let m = moment_summary(training)?;
    let d = m.dim();
    let covariance = DMatrix::from_fn(d, d, |i, j| m.covariance[i][j]);
    let min_eig = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
    if min_eig < -1e-9 {
        return Err(Error::Numerical(format!(
            "fitted covariance has eigenvalue {min_eig:e}"
        )));
    }
    Ok(GaussianComponent {
        factor: psd_factor(&covariance),
        mean: m.mean,
        covariance,
    })
}

/// k-means++ seeding: first centre uniform, later centres drawn with
/// probability proportional to squared distance from the nearest centre.
fn kmeanspp_centres(x: &PointSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.len();
    let mut centres = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = x
        .rows()
        .map(|r| squared_distance(r, x.row(centres[0])))
        .collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centres.push(next);
        for (i, r) in x.rows().enumerate() {
            d2[i] = d2[i].min(squared_distance(r, x.row(next)));
        }
    }
    centres
}

struct Component {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    log_det_half: f64,
}

impl Component {
    fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::Numerical("component covariance is not positive definite".into())
        })?;
        let log_det_half = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        Ok(Component {
            mean,
            cov,
            chol,
            log_det_half,
        })
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = x.len() as f64;
        let diff = x - &self.mean;
        let y = self
            .chol
            .l()
            .solve_lower_triangular(&diff)
            .expect("triangular solve");
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + y.norm_squared()) - self.log_det_half
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

type MixtureFit = (Vec<f64>, Vec<GaussianComponent>, FitDiagnostics);

fn fit_gmm(x: &PointSet, k: usize, max_iters: usize, tol: f64, seed: u64) -> Result<MixtureFit> {
    let n = x.len();
    let d = x.dim();
    let mut rng = rng_from_seed(seed);
    let points: Vec<DVector<f64>> = x.rows().map(DVector::from_row_slice).collect();
    let mut floored = 0;

    let global = moment_summary_or_zero(x);
    let (global, f) = floor_covariance(global);
    floored += usize::from(f);
    let mut weights = vec![1.0 / k as f64; k];
    let mut comps = kmeanspp_centres(x, k, &mut rng)
        .into_iter()
        .map(|c| Component::new(points[c].clone(), global.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut history: Vec<f64> = Vec::new();
    let mut resp = vec![0.0; n * k];
    let mut converged = false;
    let mut iterations = 0;
    let mut scratch = vec![0.0; k];
    loop {
        // E-step
        let mut ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            for (j, c) in comps.iter().enumerate() {
                scratch[j] = weights[j].ln() + c.log_density(p);
            }
            let lse = log_sum_exp(&scratch);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (scratch[j] - lse).exp();
            }
        }
        if !ll.is_finite() {
            return Err(Error::Numerical("GMM log-likelihood is not finite".into()));
        }
        if let Some(&prev) = history.last() {
            if (ll - prev).abs() < tol {
                history.push(ll);
                converged = true;
                break;
            }
        }
        history.push(ll);
        if iterations == max_iters {
            break;
        }
        iterations += 1;

        // M-step
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            weights[j] = nk / n as f64;
            if nk <= f64::MIN_POSITIVE {
                continue;
            }
            let mut mean = DVector::zeros(d);
            for (i, p) in points.iter().enumerate() {
                mean.axpy(resp[i * k + j], p, 1.0);
            }
            mean /= nk;
            let mut cov = DMatrix::zeros(d, d);
            for (i, p) in points.iter().enumerate() {
                let diff = p - &mean;
                cov.ger(resp[i * k + j], &diff, &diff, 1.0);
            }
            cov /= nk;
            let cov = (&cov + cov.transpose()) * 0.5;
            let (cov, f) = floor_covariance(cov);
            floored += usize::from(f);
            comps[j] = Component::new(mean, cov)?;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }

    let components = comps
        .into_iter()
        .map(|c| GaussianComponent {
            mean: c.mean.iter().copied().collect(),
            factor: psd_factor(&c.cov),
            covariance: c.cov,
        })
        .collect();
    Ok((
        weights,
        components,
        FitDiagnostics {
            iterations,
            converged,
            log_likelihood: history,
            floored,
        },
    ))
}

fn moment_summary_or_zero(x: &PointSet) -> DMatrix<f64> {
    let d = x.dim();
    match moment_summary(x) {
        Ok(m) => DMatrix::from_fn(d, d, |i, j| m.covariance[i][j]),
        Err(_) => DMatrix::zeros(d, d),
    }
}

impl FittedGenerator {
    pub fn dim(&self) -> usize {
        match &self.model {
            FittedModel::Gaussian(c) => c.mean.len(),
            FittedModel::Mixture { components, .. } => components[0].mean.len(),
            FittedModel::Bootstrap { training, .. } => training.dim(),
        }
    }

    /// Draws `m` i.i.d. points, all tagged `tag`.
    pub fn sample(&self, m: usize, seed: u64, tag: SourceTag) -> Result<PointSet> {
        if m == 0 {
            return Err(Error::Value("sample size must be >= 1".into()));
        }
        let d = self.dim();
        let mut rng = rng_from_seed(seed);
        let mut data = Vec::with_capacity(m * d);
        match &self.model {
            FittedModel::Gaussian(c) => {
                for _ in 0..m {
                    c.draw(&mut rng, &mut data);
                }
            }
            FittedModel::Mixture {
                weights,
                components,
            } => {
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::Internal("mixture weights are corrupt".into()));
                }
                for _ in 0..m {
                    let u = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = components.len() - 1;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            pick = j;
                            break;
                        }
                    }
                    components[pick].draw(&mut rng, &mut data);
                }
            }
            FittedModel::Bootstrap { training, sigma } => {
                for _ in 0..m {
                    let row = training.row(rng.random_range(0..training.len()));
                    if *sigma > 0.0 {
                        data.extend(row.iter().map(|v| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            v + sigma * z
                        }));
                    } else {
                        data.extend_from_slice(row);
                    }
                }
            }
        }
        PointSet::new(data, d, vec![tag; m]).map_err(|e| Error::Internal(e.to_string()))
    }
}
