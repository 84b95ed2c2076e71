use serde::{Deserialize, Serialize};

use crate::casq::{cas_compress, cas_decompress, CasConfig, CasWindow};
use crate::error::{Error, Result};
use crate::gradient::{dist_sq, GradientVector};
use crate::sparse::topk_delta_check;

use super::dist::EntryDistribution;
use super::stats::{run_trials, SampleStats, Z95};

const DELTA_STREAM: u64 = 0x444c_5441;

/// `delta_hat = 1 - mean(||C(g) - g||^2 / ||g||^2)` with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub trials: usize,
    /// Zero-norm inputs left out.
    pub skipped: usize,
    pub delta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl DeltaEstimate {
    /// `delta_hat` in `(0, 1]` with the interval excluding zero.
    pub fn is_compressor(&self) -> bool {
        self.delta_hat > 0.0 && self.delta_hat <= 1.0 && self.ci_low > 0.0
    }
}

/// Estimate the compressor constant of `compress` on inputs drawn by
/// `sample`. Both closures receive a per-trial seed.
pub fn delta_estimate<S, C>(
    trials: usize,
    seed: u64,
    sample: S,
    compress: C,
) -> Result<DeltaEstimate>
where
    S: Fn(u64) -> Result<GradientVector> + Sync + Send,
    C: Fn(&GradientVector, u64) -> Result<GradientVector> + Sync + Send,
{
    if trials < 2 {
        return Err(Error::Config("need at least 2 trials".into()));
    }
    let ratios = run_trials(trials, seed, DELTA_STREAM, |s| -> Result<Option<f64>> {
        let g = sample(s)?;
        let g2 = g.l2_norm_sq();
        if g2 == 0.0 {
            return Ok(None);
        }
        let c = compress(&g, s)?;
        Ok(Some(dist_sq(g.as_slice(), c.as_slice())? / g2))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = ratios.iter().flatten().copied().collect();
    let s = SampleStats::from_slice(&kept);
    let delta_hat = 1.0 - s.mean;
    Ok(DeltaEstimate {
        trials: kept.len(),
        skipped: trials - kept.len(),
        delta_hat,
        se: s.se_mean,
        ci_low: delta_hat - Z95 * s.se_mean,
        ci_high: delta_hat + Z95 * s.se_mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CasDeltaReport {
    pub estimate: DeltaEstimate,
    /// Largest `m_k / N_k` seen in any trial and cluster.
    pub max_bucket_ratio: f64,
}

/// Single-worker CASQ on `dim`-entry gradients from `dist`, clustering each
/// input afresh.
pub fn casq_delta(
    dim: usize,
    config: &CasConfig,
    dist: &EntryDistribution,
    trials: usize,
    seed: u64,
) -> Result<CasDeltaReport> {
    dist.validate()?;
    config.validate()?;
    let ratio = std::sync::Mutex::new(0.0f64);
    let estimate = delta_estimate(
        trials,
        seed,
        |s| dist.sample(dim, s),
        |g, s| {
            let cfg = CasConfig {
                seed: s,
                ..config.clone()
            };
            let window = CasWindow::build(&cfg, 0, g)?;
            let assignment = window.assign(g);
            let worst = assignment
                .sizes()
                .iter()
                .zip(window.allocation().per_cluster())
                .filter(|(&n, _)| n > 0)
                .map(|(&n, &m)| m as f64 / n as f64)
                .fold(0.0, f64::max);
            let mut r = ratio.lock().expect("no poisoned lock");
            *r = r.max(worst);
            drop(r);
            cas_decompress(&cas_compress(g, &window, &assignment)?)
        },
    )?;
    let max_bucket_ratio = ratio.into_inner().expect("no poisoned lock");
    Ok(CasDeltaReport {
        estimate,
        max_bucket_ratio,
    })
}

/// Top-K energy ratio on `trials` random vectors; returns the smallest
/// `ratio - K/b` margin seen.
pub fn topk_min_margin(
    dim: usize,
    num_blocks: usize,
    k: usize,
    dist: &EntryDistribution,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let margins = run_trials(trials, seed, DELTA_STREAM ^ 1, |s| -> Result<f64> {
        let e = topk_delta_check(&dist.sample(dim, s)?, num_blocks, k)?;
        Ok(e.ratio - e.bound)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(margins.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_delta_one() {
        let d = EntryDistribution::Gaussian {
            mean: 0.0,
            std: 1.0,
        };
        let e = delta_estimate(100, 1, |s| d.sample(10, s), |g, _| Ok(g.clone())).unwrap();
        assert_eq!(e.delta_hat, 1.0);
        assert!(e.is_compressor() || e.se == 0.0);
    }

    #[test]
    fn zero_inputs_are_skipped() {
        let e = delta_estimate(
            10,
            1,
            |_| Ok(GradientVector::zeros(3)),
            |g, _| Ok(g.clone()),
        );
        assert_eq!(e.unwrap().skipped, 10);
    }

    #[test]
    fn casq_is_a_delta_compressor() {
        let r = casq_delta(
            1024,
            &CasConfig::new(4, 32, 0),
            &EntryDistribution::default_mixture(),
            100,
            5,
        )
        .unwrap();
        assert!(r.estimate.is_compressor(), "{r:?}");
        assert!(r.estimate.delta_hat < 1.0);
    }

    #[test]
    fn topk_margin_is_non_negative() {
        let d = EntryDistribution::Gaussian {
            mean: 0.0,
            std: 1.0,
        };
        assert!(topk_min_margin(64, 16, 4, &d, 200, 2).unwrap() >= 0.0);
    }
}
