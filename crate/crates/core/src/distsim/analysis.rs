use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::GradientVector;

/// Floor applied to the measured compressor constant.
pub const DELTA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEval {
    pub a: f64,
    pub b: f64,
    pub bound: f64,
}

/// Constants of the convergence theorem and its right-hand side at horizon
/// `horizon`:
///
/// ```text
/// a = 2 / (2 - (rho + L) eta)
/// b = 4 L^2 W sigma^2 (1 - delta) / (rho delta^2 (2 - (rho + L) eta))
/// min_{t <= T} ||grad f(w_t)||^2 <= a (f0 - f*) / (eta (T + 1)) + b eta
/// ```
#[allow(clippy::too_many_arguments)]
pub fn eval_bound(
    smoothness: f64,
    rho: f64,
    lr: f64,
    delta: f64,
    sigma_sq: f64,
    workers: usize,
    horizon: usize,
    f0: f64,
    f_star: f64,
) -> Result<BoundEval> {
    if !(rho > 0.0 && lr > 0.0 && smoothness > 0.0) {
        return Err(Error::Config("L, rho and eta must be positive".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Config(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let slack = 2.0 - (rho + smoothness) * lr;
    if slack <= 0.0 {
        return Err(Error::Config(format!(
            "step size {lr} is not below 2/(rho+L) = {}",
            2.0 / (rho + smoothness)
        )));
    }
    let a = 2.0 / slack;
    let b = 4.0 * smoothness * smoothness * workers as f64 * sigma_sq * (1.0 - delta)
        / (rho * delta * delta * slack);
    Ok(BoundEval {
        a,
        b,
        bound: a * (f0 - f_star) / (lr * (horizon as f64 + 1.0)) + b * lr,
    })
}

/// Per-step decrease allowed for the virtual iterate:
/// `-eta (1 - (rho + L) eta / 2) ||grad f(w_t)||^2 + L^2 / (2 rho) ||nu_t - w_t||^2`.
pub fn delta_cas(lr: f64, rho: f64, smoothness: f64, grad_norm_sq: f64, offset_sq: f64) -> f64 {
    -lr * (1.0 - (rho + smoothness) * lr / 2.0) * grad_norm_sq
        + smoothness * smoothness / (2.0 * rho) * offset_sq
}

/// `nu_t = w_t - (1/W) Σ_i e_t^i`. The residuals already carry the step size,
/// since workers compress `eta g + e`.
pub fn virtual_iterate(omega: &[f64], errors: &[GradientVector]) -> Vec<f64> {
    let w = errors.len() as f64;
    let mut nu = omega.to_vec();
    for e in errors {
        for (n, v) in nu.iter_mut().zip(e.as_slice()) {
            *n -= v / w;
        }
    }
    nu
}

/// `4 (1 - delta) / delta^2`, the factor bounding `||e/eta||^2` by `sigma_i^2`.
pub fn error_bound_factor(delta: f64) -> f64 {
    4.0 * (1.0 - delta) / (delta * delta)
}
