use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::GradientVector;
use crate::rng::rng_from;

/// Synthetic gradient-entry distributions for the moment checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EntryDistribution {
    Gaussian {
        mean: f64,
        std: f64,
    },
    /// Equal-weight mixture of Gaussians.
    GaussianMixture {
        components: Vec<(f64, f64)>,
    },
    /// Magnitude `LogNormal(mu, sigma)` with a fair random sign.
    SignedLogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl EntryDistribution {
    /// Four-component mixture with two modes on each side of zero.
    pub fn default_mixture() -> Self {
        EntryDistribution::GaussianMixture {
            components: vec![(-1.0, 0.2), (-0.2, 0.05), (0.2, 0.05), (1.0, 0.2)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            EntryDistribution::Gaussian { mean, std } => mean.is_finite() && *std >= 0.0,
            EntryDistribution::GaussianMixture { components } => {
                !components.is_empty() && components.iter().all(|(m, s)| m.is_finite() && *s >= 0.0)
            }
            EntryDistribution::SignedLogNormal { mu, sigma } => mu.is_finite() && *sigma >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid entry distribution {self:?}"
            )))
        }
    }

    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            EntryDistribution::Gaussian { mean, std } => {
                let d = Normal::new(*mean, *std).expect("validated");
                out.iter_mut().for_each(|v| *v = d.sample(rng));
            }
            EntryDistribution::GaussianMixture { components } => {
                let ds: Vec<Normal<f64>> = components
                    .iter()
                    .map(|&(m, s)| Normal::new(m, s).expect("validated"))
                    .collect();
                for v in out.iter_mut() {
                    let k = rng.random_range(0..ds.len());
                    *v = ds[k].sample(rng);
                }
            }
            EntryDistribution::SignedLogNormal { mu, sigma } => {
                let d = LogNormal::new(*mu, *sigma).expect("validated");
                for v in out.iter_mut() {
                    let m = d.sample(rng);
                    *v = if rng.random::<bool>() { m } else { -m };
                }
            }
        }
    }

    pub fn sample(&self, dim: usize, seed: u64) -> Result<GradientVector> {
        self.validate()?;
        let mut v = vec![0.0; dim];
        self.sample_into(&mut rng_from(seed), &mut v);
        GradientVector::new(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let g = EntryDistribution::Gaussian {
            mean: 0.5,
            std: 0.1,
        }
        .sample(100_000, 3)
        .unwrap();
        let mean = g.as_slice().iter().sum::<f64>() / 1e5;
        assert!((mean - 0.5).abs() < 0.002);
    }

    #[test]
    fn mixture_is_two_sided() {
        let g = EntryDistribution::default_mixture()
            .sample(1000, 1)
            .unwrap();
        assert!(g.as_slice().iter().any(|&v| v > 0.0));
        assert!(g.as_slice().iter().any(|&v| v < 0.0));
        let ln = EntryDistribution::SignedLogNormal {
            mu: 0.0,
            sigma: 1.0,
        }
        .sample(1000, 1)
        .unwrap();
        assert!(ln.as_slice().iter().any(|&v| v < 0.0));
    }

    #[test]
    fn negative_spread_is_rejected() {
        let d = EntryDistribution::Gaussian {
            mean: 0.0,
            std: -1.0,
        };
        assert!(d.sample(3, 0).is_err());
    }
}
