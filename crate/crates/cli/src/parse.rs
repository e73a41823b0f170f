//! Compact textual forms for generators, selection policies and feature maps.

use collapse_lab::generators::GeneratorKind;
use collapse_lab::looper::Paradigm;
use collapse_lab::selection::SelectionKind;
use collapse_lab::{DistanceMetric, FeatureMap, MetricKind};

use crate::error::{CliError, CliResult};

fn number<T: std::str::FromStr>(what: &str, s: &str) -> CliResult<T> {
    s.trim()
        .parse()
        .map_err(|_| CliError::config(format!("invalid {what}: {s:?}")))
}

/// `gaussian`, `gmm:K[:MAX_ITERS[:TOL]]` or `bootstrap[:SIGMA]`.
pub fn generator(s: &str) -> CliResult<GeneratorKind> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let kind = match parts.as_slice() {
        ["gaussian" | "gaussian-mle"] => GeneratorKind::GaussianMle,
        ["gmm", k, rest @ ..] if rest.len() <= 2 => GeneratorKind::GmmEm {
            components: number("component count", k)?,
            max_iters: rest
                .first()
                .map_or(Ok(200), |v| number("max iterations", v))?,
            tol: rest.get(1).map_or(Ok(1e-6), |v| number("tolerance", v))?,
        },
        ["bootstrap"] => GeneratorKind::BootstrapJitter { sigma: 0.0 },
        ["bootstrap", sigma] => GeneratorKind::BootstrapJitter {
            sigma: number("sigma", sigma)?,
        },
        _ => return Err(CliError::config(format!("unknown generator {s:?}"))),
    };
    kind.validate()?;
    Ok(kind)
}

/// `none`, `greedy`, `random` or `threshold:TAU0[:ALPHA]`.
pub fn selection(s: &str, default_alpha: f64) -> CliResult<Option<SelectionKind>> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let kind = match parts.as_slice() {
        ["none" | "vanilla"] => return Ok(None),
        ["greedy"] => SelectionKind::Greedy,
        ["random"] => SelectionKind::Random,
        ["threshold"] => {
            return Err(CliError::config(
                "threshold selection needs an explicit tau0 (threshold:TAU0[:ALPHA])",
            ))
        }
        ["threshold", tau0] => SelectionKind::ThresholdDecay {
            tau0: number("tau0", tau0)?,
            alpha: default_alpha,
        },
        ["threshold", tau0, alpha] => SelectionKind::ThresholdDecay {
            tau0: number("tau0", tau0)?,
            alpha: number("alpha", alpha)?,
        },
        _ => return Err(CliError::config(format!("unknown selection {s:?}"))),
    };
    kind.validate()?;
    Ok(Some(kind))
}

/// `identity` or `randproj:DIM:SEED`.
pub fn feature(s: &str) -> CliResult<FeatureMap> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    match parts.as_slice() {
        ["identity"] => Ok(FeatureMap::Identity),
        ["randproj", dim, seed] => {
            let target_dim: usize = number("projection dimension", dim)?;
            if target_dim == 0 {
                return Err(CliError::config("projection dimension must be positive"));
            }
            Ok(FeatureMap::RandomProjection {
                target_dim,
                seed: number("projection seed", seed)?,
            })
        }
        _ => Err(CliError::config(format!("unknown feature map {s:?}"))),
    }
}

pub fn metric_kind(s: &str) -> CliResult<MetricKind> {
    match s.trim() {
        "euclidean" => Ok(MetricKind::Euclidean),
        "squared" | "squared_euclidean" | "sqeuclidean" => Ok(MetricKind::SquaredEuclidean),
        _ => Err(CliError::config(format!("unknown metric {s:?}"))),
    }
}

pub fn metric(kind: Option<&str>, feature_map: Option<&str>) -> CliResult<DistanceMetric> {
    let mut metric = DistanceMetric {
        kind: kind
            .map(metric_kind)
            .transpose()?
            .unwrap_or(MetricKind::Euclidean),
        feature_map: None,
    };
    if let Some(f) = feature_map {
        metric.feature_map = match feature(f)? {
            FeatureMap::Identity => None,
            map => Some(map),
        };
    }
    Ok(metric)
}

pub fn paradigm(s: &str) -> CliResult<Paradigm> {
    s.parse().map_err(CliError::from)
}

pub fn positive<T>(what: &str, s: &str) -> CliResult<T>
where
    T: std::str::FromStr + PartialOrd + Default,
{
    let v: T = number(what, s)?;
    if v <= T::default() {
        return Err(CliError::config(format!(
            "{what} must be positive, got {s}"
        )));
    }
    Ok(v)
}

pub fn unsigned<T: std::str::FromStr>(what: &str, s: &str) -> CliResult<T> {
    number(what, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        assert_eq!(generator("gaussian").unwrap(), GeneratorKind::GaussianMle);
        assert_eq!(
            generator("gmm:3").unwrap(),
            GeneratorKind::GmmEm {
                components: 3,
                max_iters: 200,
                tol: 1e-6
            }
        );
        assert_eq!(
            generator("gmm:2:50:1e-8").unwrap(),
            GeneratorKind::GmmEm {
                components: 2,
                max_iters: 50,
                tol: 1e-8
            }
        );
        assert_eq!(
            generator("bootstrap:0.05").unwrap(),
            GeneratorKind::BootstrapJitter { sigma: 0.05 }
        );
        for bad in ["", "gmm", "gmm:0", "bootstrap:-1", "bootstrap:x", "vae"] {
            assert_eq!(
                generator(bad).unwrap_err().exit,
                crate::error::Exit::Config,
                "{bad}"
            );
        }
    }

    #[test]
    fn selections() {
        assert_eq!(selection("none", 0.95).unwrap(), None);
        assert_eq!(
            selection("greedy", 0.95).unwrap(),
            Some(SelectionKind::Greedy)
        );
        assert_eq!(
            selection("threshold:5", 0.95).unwrap(),
            Some(SelectionKind::ThresholdDecay {
                tau0: 5.0,
                alpha: 0.95
            })
        );
        assert_eq!(
            selection("threshold:0:0", 0.95).unwrap(),
            Some(SelectionKind::ThresholdDecay {
                tau0: 0.0,
                alpha: 0.0
            })
        );
        for bad in ["threshold", "threshold:5:1.5", "threshold:-1", "farthest"] {
            assert!(selection(bad, 0.95).is_err(), "{bad}");
        }
    }

    #[test]
    fn features() {
        assert_eq!(feature("identity").unwrap(), FeatureMap::Identity);
        assert_eq!(
            feature("randproj:4:9").unwrap(),
            FeatureMap::RandomProjection {
                target_dim: 4,
                seed: 9
            }
        );
        assert!(feature("randproj:0:9").is_err());
        assert!(feature("randproj:4").is_err());
        assert_eq!(
            metric(None, Some("identity")).unwrap(),
            DistanceMetric::euclidean()
        );
    }
}
