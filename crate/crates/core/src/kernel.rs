//! Low-dimensional similarity kernels and their gradients.
//!
//! Everything is written in terms of the squared distance `s = |y_a - y_b|^2`,
//! so the heavy-tailed family `(1 + a |y|^{2b})^{-1}` evaluates as
//! `(1 + a s^b)^{-1}` with no square root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    CauchyAb,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub family: KernelFamily,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
}

impl std::fmt::Display for KernelParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.family {
            KernelFamily::CauchyAb => write!(f, "cauchy(a={}, b={})", self.a, self.b),
            KernelFamily::Gaussian => write!(f, "gaussian(tau={})", self.tau),
        }
    }
}

impl KernelParams {
    pub fn cauchy(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Config(format!(
                "cauchy kernel needs a, b > 0 (a={a}, b={b})"
            )));
        }
        Ok(Self {
            family: KernelFamily::CauchyAb,
            a,
            b,
            tau: 1.0,
        })
    }

    pub fn gaussian(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!(
                "gaussian kernel needs tau > 0 (tau={tau})"
            )));
        }
        Ok(Self {
            family: KernelFamily::Gaussian,
            a: 1.0,
            b: 1.0,
            tau,
        })
    }

    /// The customary `a = 1.929, b = 0.7915`, usable without running [`fit_ab`].
    pub fn umap_default() -> Self {
        Self {
            family: KernelFamily::CauchyAb,
            a: 1.929,
            b: 0.7915,
            tau: 1.0,
        }
    }
}

pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Kernel value in (0, 1].
pub fn phi(sq_dist: f64, p: &KernelParams) -> f64 {
    match p.family {
        KernelFamily::CauchyAb => 1.0 / (1.0 + p.a * sq_dist.powf(p.b)),
        KernelFamily::Gaussian => (-sq_dist / (2.0 * p.tau)).exp(),
    }
}

/// `log phi`, evaluated without forming `phi` so it stays finite for any
/// finite distance.
pub fn log_phi(sq_dist: f64, p: &KernelParams) -> f64 {
    match p.family {
        KernelFamily::CauchyAb => -(p.a * sq_dist.powf(p.b)).ln_1p(),
        KernelFamily::Gaussian => -sq_dist / (2.0 * p.tau),
    }
}

/// `1 - phi`, computed without cancellation.
pub fn one_minus_phi(sq_dist: f64, p: &KernelParams) -> f64 {
    match p.family {
        KernelFamily::CauchyAb => {
            let u = p.a * sq_dist.powf(p.b);
            u / (1.0 + u)
        }
        KernelFamily::Gaussian => -(-sq_dist / (2.0 * p.tau)).exp_m1(),
    }
}

/// The repulsive potential whose exact gradient is
/// [`grad_log_one_minus_phi`]. With `eps = 0` it equals `log(1 - phi)`;
/// `eps > 0` keeps it finite at coincident points.
///
/// Far apart the value is tiny and the naive forms lose it to cancellation,
/// so each family switches to an equivalent `ln_1p` form there.
pub fn log_one_minus_phi_regularized(sq_dist: f64, p: &KernelParams, eps: f64) -> f64 {
    match p.family {
        KernelFamily::CauchyAb => {
            let u = p.a * sq_dist.powf(p.b);
            if u >= 1.0 {
                p.b * (eps / sq_dist).ln_1p() - u.recip().ln_1p()
            } else {
                p.b * (sq_dist + eps).ln() + p.a.ln() - u.ln_1p()
            }
        }
        KernelFamily::Gaussian => {
            let u = sq_dist / (2.0 * p.tau);
            let c = eps / (2.0 * p.tau);
            let e = (-u).exp();
            let tail = (1.0 - c) * e;
            if tail.abs() <= 0.5 {
                (-tail).ln_1p()
            } else {
                (-(-u).exp_m1() + c * e).ln()
            }
        }
    }
}

fn scaled_diff(y_a: &[f64], y_b: &[f64], coef: f64) -> Vec<f64> {
    y_a.iter().zip(y_b).map(|(a, b)| coef * (a - b)).collect()
}

/// Gradient of `log phi(y_a, y_b)` with respect to `y_a`.
///
/// Coincident points return zero: for `b < 1` the heavy-tailed gradient is
/// unbounded there, and the pair is stationary by symmetry.
pub fn grad_log_phi(y_a: &[f64], y_b: &[f64], p: &KernelParams) -> Vec<f64> {
    let s = sq_dist(y_a, y_b);
    if s == 0.0 {
        return vec![0.0; y_a.len()];
    }
    let coef = match p.family {
        KernelFamily::Gaussian => -1.0 / p.tau,
        KernelFamily::CauchyAb => {
            let sb = s.powf(p.b);
            -2.0 * p.a * p.b * sb / s / (1.0 + p.a * sb)
        }
    };
    scaled_diff(y_a, y_b, coef)
}

/// Gradient of the regularized `log(1 - phi(y_a, y_c))` with respect to `y_a`.
/// `eps` enters only through the `1/s` factor that blows up as `s -> 0`.
pub fn grad_log_one_minus_phi(y_a: &[f64], y_c: &[f64], p: &KernelParams, eps: f64) -> Vec<f64> {
    let s = sq_dist(y_a, y_c);
    if s == 0.0 {
        return vec![0.0; y_a.len()];
    }
    let coef = match p.family {
        KernelFamily::CauchyAb => {
            let sb = s.powf(p.b);
            2.0 * p.b * (1.0 / (s + eps) - p.a * sb / s / (1.0 + p.a * sb))
        }
        KernelFamily::Gaussian => {
            let u = s / (2.0 * p.tau);
            let c = eps / (2.0 * p.tau);
            let e = (-u).exp();
            (1.0 - c) * e / (-(-u).exp_m1() + c * e) / p.tau
        }
    };
    scaled_diff(y_a, y_c, coef)
}

/// Result of fitting `(1 + a d^{2b})^{-1}` to the min-dist target curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinDistFit {
    pub min_dist: f64,
    pub fitted_a: f64,
    pub fitted_b: f64,
    pub fit_rmse: f64,
}

pub const FIT_GRID_POINTS: usize = 301;
const FIT_MAX_ITER: usize = 200;
const FIT_STEP_TOL: f64 = 1e-10;

/// Grid `0.00, 0.01, ..., 3.00`.
pub fn fit_grid() -> Vec<f64> {
    (0..FIT_GRID_POINTS).map(|k| k as f64 / 100.0).collect()
}

/// 1 up to `min_dist`, exponential decay beyond it.
pub fn target_curve(d: f64, min_dist: f64) -> f64 {
    if d <= min_dist {
        1.0
    } else {
        (-(d - min_dist)).exp()
    }
}

fn curve(d: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * d.powf(2.0 * b))
}

/// Root-mean-square misfit of `(a, b)` against the target on the grid.
pub fn curve_rmse(min_dist: f64, a: f64, b: f64) -> f64 {
    let grid = fit_grid();
    let sse: f64 = grid
        .iter()
        .map(|&d| (curve(d, a, b) - target_curve(d, min_dist)).powi(2))
        .sum();
    (sse / grid.len() as f64).sqrt()
}

/// Damped Gauss-Newton from `(a, b) = (1, 1)`.
pub fn fit_ab(min_dist: f64) -> Result<MinDistFit> {
    if !(0.0..3.0).contains(&min_dist) {
        return Err(Error::Config(format!(
            "min_dist must lie in [0, 3), got {min_dist}"
        )));
    }
    let grid = fit_grid();
    let target: Vec<f64> = grid.iter().map(|&d| target_curve(d, min_dist)).collect();
    let sse = |a: f64, b: f64| -> f64 {
        grid.iter()
            .zip(&target)
            .map(|(&d, &t)| (curve(d, a, b) - t).powi(2))
            .sum()
    };

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut current = sse(a, b);
    let mut trace = vec![current];
    for _ in 0..FIT_MAX_ITER {
        // Normal equations J^T J, J^T r for the 2-parameter model.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&d, &t) in grid.iter().zip(&target) {
            if d == 0.0 {
                continue;
            }
            let p = d.powf(2.0 * b);
            let denom = (1.0 + a * p).powi(2);
            let da = -p / denom;
            let db = -a * p * 2.0 * d.ln() / denom;
            let r = curve(d, a, b) - t;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let (maa, mbb) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = maa * mbb - jab * jab;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(mbb * ga - jab * gb) / det;
            let step_b = -(maa * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 {
                let candidate = sse(na, nb);
                if candidate <= current {
                    accepted = Some((na, nb, candidate, step_a.hypot(step_b)));
                    break;
                }
            }
            lambda *= 10.0;
        }
        match accepted {
            Some((na, nb, value, step)) => {
                a = na;
                b = nb;
                current = value;
                trace.push(value);
                lambda = (lambda * 0.1).max(1e-12);
                if step < FIT_STEP_TOL {
                    return Ok(MinDistFit {
                        min_dist,
                        fitted_a: a,
                        fitted_b: b,
                        fit_rmse: (current / grid.len() as f64).sqrt(),
                    });
                }
            }
            // No descent direction left: at a stationary point.
            None if (ga.hypot(gb)) < 1e-12 => {
                return Ok(MinDistFit {
                    min_dist,
                    fitted_a: a,
                    fitted_b: b,
                    fit_rmse: (current / grid.len() as f64).sqrt(),
                });
            }
            None => break,
        }
    }
    Err(Error::FitDiverged {
        iterations: trace.len() - 1,
        trace,
    })
}
