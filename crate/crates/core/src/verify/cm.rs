use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::GradientVector;
use crate::rng::rng_from;
use crate::sketch::CountMinArray;

use super::stats::{run_trials, within_rel, within_se, SampleStats};

/// Largest hash-map space the exhaustive oracles enumerate.
pub const MAX_ENUMERATION: u128 = 1_000_000;

const CM_STREAM: u64 = 0x434d_4d43;

/// Empirical moments of a per-entry loss against closed-form values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub name: String,
    pub trials: usize,
    pub theory_mean: f64,
    pub empirical_mean: f64,
    pub se_mean: f64,
    /// Mean passes when within `mean_k` standard errors.
    pub mean_k: f64,
    pub mean_pass: bool,
    pub theory_variance: f64,
    pub empirical_variance: f64,
    pub se_variance: f64,
    /// Variance passes when within this relative tolerance.
    pub variance_tol: f64,
    pub variance_pass: bool,
}

impl MomentReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn evaluate(
        name: &str,
        trials: usize,
        theory_mean: f64,
        theory_variance: f64,
        mean: SampleStats,
        variance: f64,
        se_variance: f64,
        mean_k: f64,
        variance_tol: f64,
    ) -> Self {
        MomentReport {
            name: name.to_string(),
            trials,
            theory_mean,
            empirical_mean: mean.mean,
            se_mean: mean.se_mean,
            mean_k,
            mean_pass: within_se(mean.mean, theory_mean, mean.se_mean, mean_k)
                || mean.mean == theory_mean,
            theory_variance,
            empirical_variance: variance,
            se_variance,
            variance_tol,
            variance_pass: within_rel(variance, theory_variance, variance_tol),
        }
    }

    pub fn pass(&self) -> bool {
        self.mean_pass && self.variance_pass
    }
}

/// `(N-1) mu / m`.
pub fn cm_loss_mean(n: usize, m: usize, mu: f64) -> f64 {
    (n as f64 - 1.0) * mu / m as f64
}

/// `((N-1)/m) (sigma^2 + (1 - 1/m) mu^2)`.
pub fn cm_loss_variance(n: usize, m: usize, mu: f64, sigma: f64) -> f64 {
    let mf = m as f64;
    (n as f64 - 1.0) / mf * (sigma * sigma + (1.0 - 1.0 / mf) * mu * mu)
}

/// Monte Carlo of the count-min (bucket-sum) loss `g_hat(j) - g(j)`. Every
/// trial draws fresh i.i.d. `N(mu, sigma^2)` entries and a fresh hash seed.
/// The mean is taken over per-trial averages across entries (so its standard
/// error accounts for within-trial correlation); the variance pools every
/// entry of every trial, which estimates the marginal per-entry variance.
pub fn mc_cm_moments(
    n: usize,
    m: usize,
    mu: f64,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<MomentReport> {
    if n <= m || m == 0 {
        return Err(Error::Config(format!(
            "count-min check needs N > m >= 1 (N={n}, m={m})"
        )));
    }
    if trials < 2 {
        return Err(Error::Config("need at least 2 trials".into()));
    }
    let normal =
        Normal::new(mu, sigma).map_err(|e| Error::Config(format!("invalid distribution: {e}")))?;
    let per_trial = run_trials(trials, seed, CM_STREAM, |s| -> Result<(f64, f64, f64)> {
        let mut rng = rng_from(s);
        let g: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let hash_seed = rand::Rng::random(&mut rng);
        let g = GradientVector::new(g)?;
        let mut cm = CountMinArray::new(n, m, hash_seed)?;
        cm.insert(&g)?;
        let est = cm.query();
        let (mut s1, mut s2) = (0.0, 0.0);
        for (e, v) in est.as_slice().iter().zip(g.as_slice()) {
            let loss = e - v;
            s1 += loss;
            s2 += loss * loss;
        }
        Ok((s1 / n as f64, s1, s2))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = per_trial.iter().map(|t| t.0).collect();
    let stats = SampleStats::from_slice(&means);
    let total = (n * trials) as f64;
    let s1: f64 = super::stats::compensated_sum(per_trial.iter().map(|t| t.1));
    let s2: f64 = super::stats::compensated_sum(per_trial.iter().map(|t| t.2));
    let pooled_mean = s1 / total;
    let variance = (s2 - total * pooled_mean * pooled_mean) / (total - 1.0);
    // se of a variance for roughly Gaussian losses over the trial count
    let se_variance = variance * (2.0 / (trials as f64 - 1.0)).sqrt();
    Ok(MomentReport::evaluate(
        "count-min loss",
        trials,
        cm_loss_mean(n, m, mu),
        cm_loss_variance(n, m, mu, sigma),
        stats,
        variance,
        se_variance,
        3.0,
        0.05,
    ))
}

/// Exact per-entry loss moments for a fixed vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryMoments {
    pub mean: f64,
    pub variance: f64,
}

fn check_space(m: usize, n: usize) -> Result<()> {
    let space = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if space > MAX_ENUMERATION {
        return Err(Error::StateSpaceTooLarge(space));
    }
    Ok(())
}

/// Visit every map `{0..n} -> {0..m}` in lexicographic order.
pub(crate) fn for_each_map(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    let mut h = vec![0usize; n];
    loop {
        f(&h);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            h[i] += 1;
            if h[i] < m {
                break;
            }
            h[i] = 0;
            i += 1;
        }
    }
}

/// Enumerate all `m^N` equally likely hash maps and return each entry's
/// exact count-min loss mean and variance.
pub fn exhaustive_cm_oracle(g: &GradientVector, m: usize) -> Result<Vec<EntryMoments>> {
    if m == 0 {
        return Err(Error::Config("m must be >= 1".into()));
    }
    let n = g.dim();
    check_space(m, n)?;
    let v = g.as_slice();
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut count = 0usize;
    let mut buckets = vec![0.0; m];
    for_each_map(n, m, |h| {
        buckets.iter_mut().for_each(|b| *b = 0.0);
        for (i, &b) in h.iter().enumerate() {
            buckets[b] += v[i];
        }
        for j in 0..n {
            let loss = buckets[h[j]] - v[j];
            s1[j] += loss;
            s2[j] += loss * loss;
        }
        count += 1;
    });
    let c = count as f64;
    Ok((0..n)
        .map(|j| {
            let mean = s1[j] / c;
            EntryMoments {
                mean,
                variance: s2[j] / c - mean * mean,
            }
        })
        .collect())
}

/// Fixed-`g` closed form: mean `Σ_{i≠j} g(i)/m`, variance
/// `(1/m)(1 - 1/m) Σ_{i≠j} g(i)^2`.
pub fn cm_closed_form(g: &GradientVector, m: usize) -> Vec<EntryMoments> {
    let v = g.as_slice();
    let mf = m as f64;
    let total: f64 = v.iter().sum();
    let total_sq: f64 = v.iter().map(|x| x * x).sum();
    v.iter()
        .map(|&x| EntryMoments {
            mean: (total - x) / mf,
            variance: (1.0 / mf) * (1.0 - 1.0 / mf) * (total_sq - x * x),
        })
        .collect()
}

/// Largest closed-form versus enumeration gap over random small instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleAgreement {
    pub instances: usize,
    pub max_mean_gap: f64,
    pub max_variance_gap: f64,
}

impl OracleAgreement {
    pub fn within(&self, tol: f64) -> bool {
        self.max_mean_gap <= tol && self.max_variance_gap <= tol
    }
}

/// Draw `instances` vectors with `1 <= N <= max_n` standard normal entries
/// and `1 <= m <= max_m`, and compare [`cm_closed_form`] with
/// [`exhaustive_cm_oracle`] on each.
pub fn cm_oracle_agreement(
    instances: usize,
    max_n: usize,
    max_m: usize,
    seed: u64,
) -> Result<OracleAgreement> {
    if max_n == 0 || max_m == 0 {
        return Err(Error::Config("oracle sizes must be >= 1".into()));
    }
    check_space(max_m, max_n)?;
    let gaps = run_trials(instances, seed, CM_STREAM ^ 1, |s| -> Result<(f64, f64)> {
        let mut rng = rng_from(s);
        let n = rng.random_range(1..=max_n);
        let m = rng.random_range(1..=max_m);
        let g = GradientVector::new((0..n).map(|_| rng.sample(StandardNormal)).collect())?;
        let exact = exhaustive_cm_oracle(&g, m)?;
        Ok(exact
            .iter()
            .zip(cm_closed_form(&g, m))
            .fold((0.0f64, 0.0f64), |(a, b), (e, c)| {
                (
                    a.max((e.mean - c.mean).abs()),
                    b.max((e.variance - c.variance).abs()),
                )
            }))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(OracleAgreement {
        instances,
        max_mean_gap: gaps.iter().map(|g| g.0).fold(0.0, f64::max),
        max_variance_gap: gaps.iter().map(|g| g.1).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_agree() {
        let a = cm_oracle_agreement(50, 6, 3, 1).unwrap();
        assert_eq!(a.instances, 50);
        assert!(a.within(1e-12), "{a:?}");
        assert!(cm_oracle_agreement(1, 30, 30, 1).is_err());
    }

    fn gv(v: Vec<f64>) -> GradientVector {
        GradientVector::new(v).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(
            exhaustive_cm_oracle(&gv(vec![3.0]), 4).unwrap()[0].variance,
            0.0
        );
        let two = exhaustive_cm_oracle(&gv(vec![1.0, 1.0]), 2).unwrap();
        assert_eq!(
            two[0],
            EntryMoments {
                mean: 0.5,
                variance: 0.25
            }
        );
        let three = exhaustive_cm_oracle(&gv(vec![1.0, 2.0, 3.0]), 2).unwrap();
        assert_eq!(three[0].mean, 2.5);
    }

    #[test]
    fn closed_form_matches_enumeration() {
        let g = gv(vec![0.3, -1.2, 2.5, 0.0, 0.7]);
        for m in 1..=3 {
            let exact = exhaustive_cm_oracle(&g, m).unwrap();
            for (a, b) in exact.iter().zip(cm_closed_form(&g, m)) {
                assert!((a.mean - b.mean).abs() < 1e-12);
                assert!((a.variance - b.variance).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oversized_spaces_are_refused() {
        let g = gv(vec![1.0; 21]);
        assert!(matches!(
            exhaustive_cm_oracle(&g, 2),
            Err(Error::StateSpaceTooLarge(_))
        ));
    }

    #[test]
    fn formula_edge_cases() {
        assert_eq!(cm_loss_mean(2, 1, 0.3), 0.3);
        assert!((cm_loss_variance(2, 1, 0.3, 0.2) - 0.04).abs() < 1e-15);
        assert!((cm_loss_mean(1024, 64, 0.1) - 1.5984375).abs() < 1e-12);
    }

    #[test]
    fn zero_gradients_have_zero_loss() {
        let r = mc_cm_moments(64, 8, 0.0, 0.0, 100, 1).unwrap();
        assert_eq!(r.empirical_mean, 0.0);
        assert_eq!(r.empirical_variance, 0.0);
        assert!(r.pass());
    }

    #[test]
    fn small_monte_carlo_agrees() {
        let r = mc_cm_moments(256, 16, 0.1, 0.05, 2000, 3).unwrap();
        assert!(r.mean_pass, "{r:?}");
        assert!(
            within_rel(r.empirical_variance, r.theory_variance, 0.1),
            "{r:?}"
        );
    }

    #[test]
    fn bad_sizes_are_rejected() {
        assert!(mc_cm_moments(8, 8, 0.0, 1.0, 10, 0).is_err());
    }
}
