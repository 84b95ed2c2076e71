use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::HashMapping;
use crate::rng::rng_from;
use crate::sketch::AveragedSketch;

use super::cm::{for_each_map, EntryMoments, MomentReport, MAX_ENUMERATION};
use super::stats::{compensated_sum, run_trials, SampleStats};

const CAS_STREAM: u64 = 0x4341_534d;

/// `(1 - m/N_k)(mu_k - g(j))`.
pub fn cas_loss_mean(n: usize, m: usize, mu: f64, g_j: f64) -> f64 {
    (1.0 - m as f64 / n as f64) * (mu - g_j)
}

/// `m (N_k - 1) / N_k^2 (sigma^2 + (1 - 1/m) mu^2)`.
pub fn cas_loss_variance(n: usize, m: usize, mu: f64, sigma: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    mf * (nf - 1.0) / (nf * nf) * (sigma * sigma + (1.0 - 1.0 / mf) * mu * mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasMomentReport {
    /// Loss `g_hat(j) - g(j)` at the pinned entry.
    pub loss: MomentReport,
    /// Mean of `||g_hat||^2 - ||g||^2` over trials and its standard error.
    pub norm_gap_mean: f64,
    pub norm_gap_se: f64,
    /// `mean ||g_hat||^2 <= mean ||g||^2 + 3 SE`.
    pub norm_pass: bool,
    /// `1 - mean(||g_hat - g||^2 / ||g||^2)`.
    pub delta_hat: f64,
}

/// Single-cluster averaged-sketch Monte Carlo. Entry 0 is pinned to `g_j`;
/// the other `N_k - 1` entries are fresh `N(mu, sigma^2)` draws and the hash
/// seed is fresh in every trial.
pub fn mc_cas_moments(
    n: usize,
    m: usize,
    mu: f64,
    sigma: f64,
    g_j: f64,
    trials: usize,
    seed: u64,
) -> Result<CasMomentReport> {
    if m == 0 || m > n {
        return Err(Error::Config(format!(
            "CASQ check needs 1 <= m <= N_k (m={m}, N_k={n})"
        )));
    }
    if trials < 2 {
        return Err(Error::Config("need at least 2 trials".into()));
    }
    let normal =
        Normal::new(mu, sigma).map_err(|e| Error::Config(format!("invalid distribution: {e}")))?;
    let per_trial = run_trials(trials, seed, CAS_STREAM, |s| -> Result<(f64, f64, f64)> {
        let mut rng = rng_from(s);
        let mut g: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        g[0] = g_j;
        let mut sk = AveragedSketch::new(n, HashMapping::bucket_only(rng.random(), m)?)?;
        let pairs: Vec<(usize, f64)> = g.iter().copied().enumerate().collect();
        sk.insert(&pairs)?;
        let means = sk.means();
        let est: Vec<f64> = (0..n).map(|i| means[sk.mapping().bucket(i)]).collect();
        let g_sq: f64 = g.iter().map(|v| v * v).sum();
        let est_sq: f64 = est.iter().map(|v| v * v).sum();
        let err_sq: f64 = est.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum();
        let ratio = if g_sq > 0.0 { err_sq / g_sq } else { 0.0 };
        Ok((est[0] - g_j, est_sq - g_sq, ratio))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let loss: Vec<f64> = per_trial.iter().map(|t| t.0).collect();
    let gaps: Vec<f64> = per_trial.iter().map(|t| t.1).collect();
    let loss_stats = SampleStats::from_slice(&loss);
    let gap_stats = SampleStats::from_slice(&gaps);
    let delta_hat = 1.0 - compensated_sum(per_trial.iter().map(|t| t.2)) / trials as f64;
    Ok(CasMomentReport {
        loss: MomentReport::evaluate(
            "averaged-sketch loss",
            trials,
            cas_loss_mean(n, m, mu, g_j),
            cas_loss_variance(n, m, mu, sigma),
            loss_stats,
            loss_stats.variance,
            loss_stats.se_variance,
            3.0,
            0.05,
        ),
        norm_gap_mean: gap_stats.mean,
        norm_gap_se: gap_stats.se_mean,
        norm_pass: gap_stats.mean <= 3.0 * gap_stats.se_mean,
        delta_hat,
    })
}

/// Exact per-entry averaged-sketch loss moments for a fixed vector, by
/// enumerating all `m^N` hash maps.
pub fn exhaustive_cas_oracle(g: &[f64], m: usize) -> Result<Vec<EntryMoments>> {
    let n = g.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    if m == 0 {
        return Err(Error::Config("m must be >= 1".into()));
    }
    let space = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if space > MAX_ENUMERATION {
        return Err(Error::StateSpaceTooLarge(space));
    }
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    let mut total = 0usize;
    for_each_map(n, m, |h| {
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (i, &b) in h.iter().enumerate() {
            sums[b] += g[i];
            counts[b] += 1;
        }
        for j in 0..n {
            let loss = sums[h[j]] / counts[h[j]] as f64 - g[j];
            s1[j] += loss;
            s2[j] += loss * loss;
        }
        total += 1;
    });
    let t = total as f64;
    Ok((0..n)
        .map(|j| {
            let mean = s1[j] / t;
            EntryMoments {
                mean,
                variance: s2[j] / t - mean * mean,
            }
        })
        .collect())
}

/// Exact fixed-`g` moments next to the closed-form mean and variance
/// evaluated at the vector's own mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasOracleGap {
    pub n: usize,
    pub m: usize,
    pub entry: usize,
    pub exact: EntryMoments,
    pub formula_mean: f64,
    pub formula_variance: f64,
    /// `formula_variance / exact.variance`.
    pub variance_ratio: f64,
}

/// Quantify how far the closed forms sit from the exact enumeration for one
/// small vector. Reported, not asserted.
pub fn cas_oracle_gap(g: &[f64], m: usize, entry: usize) -> Result<CasOracleGap> {
    let exact = exhaustive_cas_oracle(g, m)?;
    let e = *exact.get(entry).ok_or(Error::IndexOutOfRange {
        index: entry,
        dim: g.len(),
    })?;
    let n = g.len();
    let mu = g.iter().sum::<f64>() / n as f64;
    let sigma = (g.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    let formula_variance = cas_loss_variance(n, m, mu, sigma);
    Ok(CasOracleGap {
        n,
        m,
        entry,
        exact: e,
        formula_mean: cas_loss_mean(n, m, mu, g[entry]),
        formula_variance,
        variance_ratio: formula_variance / e.variance,
    })
}
