//! Digamma, log-gamma and the log-volume of the unit ball.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tuning for [`digamma`]: arguments below the threshold are shifted
/// upward with `psi(x) = psi(x + 1) - 1/x` before the asymptotic series is
/// applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecfunConfig {
    pub asymptotic_threshold: f64,
}

impl Default for SpecfunConfig {
    fn default() -> Self {
        SpecfunConfig {
            asymptotic_threshold: 10.0,
        }
    }
}

// B_{2k} / (2k) for k = 1..=6, used as psi(x) ~ ln x - 1/(2x) - sum c_k x^{-2k}.
const DIGAMMA_SERIES: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
];

impl SpecfunConfig {
    pub fn new(asymptotic_threshold: f64) -> Result<Self> {
        if !(asymptotic_threshold >= 6.0) {
            return Err(Error::Domain(format!(
                "asymptotic threshold must be >= 6, got {asymptotic_threshold}"
            )));
        }
        Ok(SpecfunConfig {
            asymptotic_threshold,
        })
    }

    pub fn digamma(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("digamma needs x > 0, got {x}")));
        }
        let mut x = x;
        let mut shift = 0.0;
        while x < self.asymptotic_threshold {
            shift -= 1.0 / x;
            x += 1.0;
        }
        let inv2 = 1.0 / (x * x);
        // Horner in x^{-2}.
        let tail = DIGAMMA_SERIES
            .iter()
            .rev()
            .fold(0.0, |acc, &c| (acc + c) * inv2);
        Ok(shift + x.ln() - 0.5 / x - tail)
    }
}

/// `psi(x)` for `x > 0`, accurate to about `1e-13` absolute.
pub fn digamma(x: f64) -> Result<f64> {
    SpecfunConfig::default().digamma(x)
}

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` via the Lanczos approximation (g = 7, 9 terms),
/// with reflection below 1/2.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma needs x > 0, got {x}")));
    }
    if x == 1.0 || x == 2.0 {
        return Ok(0.0);
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Gamma(x) Gamma(1 - x) = pi / sin(pi x); sin(pi x) > 0 on (0, 1/2).
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln c_d`, the log-volume of the unit ball in `d` dimensions:
/// `(d/2) ln pi - ln Gamma(d/2 + 1)`.
pub fn log_unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("unit ball dimension must be >= 1".into()));
    }
    if d <= 64 {
        // c_1 = 2, c_2 = pi, c_d = c_{d-2} * 2pi / d
        let even = d.is_multiple_of(2);
        let mut c = if even { 1.0 } else { 2.0 };
        for k in (if even { 2 } else { 3 }..=d).step_by(2) {
            c *= 2.0 * PI / k as f64;
        }
        return Ok(c.ln());
    }
    let half = d as f64 / 2.0;
    Ok(half * PI.ln() - ln_gamma(half + 1.0)?)
}

/// psi(n) - psi(k) for integers `1 <= k <= n`.
pub fn digamma_difference(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "digamma difference needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if n - k <= 4096 {
        // harmonic tail, smallest terms first
        return Ok((k..n).rev().map(|j| 1.0 / j as f64).sum());
    }
    Ok(digamma(n as f64)? - digamma(k as f64)?)
}
