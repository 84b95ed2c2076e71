use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hash::derive_seed;

/// z-value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Sample moments of a set of scalar observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of the mean.
    pub se_mean: f64,
    /// Large-sample standard error of the variance estimate,
    /// `sqrt((m4 - s^4) / n)`.
    pub se_variance: f64,
}

impl SampleStats {
    pub fn from_slice(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return SampleStats {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
                se_mean: f64::NAN,
                se_variance: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = compensated_sum(values.iter().copied()) / nf;
        let m2 = compensated_sum(values.iter().map(|v| (v - mean).powi(2)));
        let m4 = compensated_sum(values.iter().map(|v| (v - mean).powi(4))) / nf;
        let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        let pop = m2 / nf;
        SampleStats {
            n,
            mean,
            variance,
            se_mean: (variance / nf).sqrt(),
            se_variance: ((m4 - pop * pop).max(0.0) / nf).sqrt(),
        }
    }

    /// 95% normal-approximation interval for the mean.
    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - Z95 * self.se_mean,
            self.mean + Z95 * self.se_mean,
        )
    }
}

/// `|empirical - expected| <= k * se`.
pub fn within_se(empirical: f64, expected: f64, se: f64, k: f64) -> bool {
    (empirical - expected).abs() <= k * se
}

/// `|empirical - expected| <= tol * |expected|`, or both zero.
pub fn within_rel(empirical: f64, expected: f64, tol: f64) -> bool {
    if expected == 0.0 {
        empirical.abs() <= f64::EPSILON
    } else {
        ((empirical - expected) / expected).abs() <= tol
    }
}

/// Seed of trial `trial` in stream `stream`; trials never share seeds.
pub fn trial_seed(seed: u64, stream: u64, trial: usize) -> u64 {
    derive_seed(&[seed, stream, trial as u64])
}

/// Run `f(trial_seed)` for every trial in parallel and return the results in
/// trial order, so aggregates do not depend on scheduling.
pub fn run_trials<T, F>(trials: usize, seed: u64, stream: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(trial_seed(seed, stream, t)))
        .collect()
}
