//! Dense gradient vectors and the norms used by the quantizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense, finite, non-empty vector of gradient entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GradientVector {
    values: Vec<f64>,
}

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(GradientVector { values })
    }

    /// All-zero vector of dimension `dim`.
    ///
    /// # Panics
    /// If `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "gradient dimension must be positive");
        GradientVector {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied()
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        l2_norm_sq(&self.values)
    }

    pub fn linf_norm(&self) -> f64 {
        linf_norm(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Entry-wise `self + other`.
    pub fn add(&self, other: &GradientVector) -> Result<GradientVector> {
        crate::error::ensure_dim(self.dim(), other.dim())?;
        GradientVector::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Entry-wise `self - other`.
    pub fn sub(&self, other: &GradientVector) -> Result<GradientVector> {
        crate::error::ensure_dim(self.dim(), other.dim())?;
        GradientVector::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Result<GradientVector> {
        GradientVector::new(self.values.iter().map(|v| v * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for GradientVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        GradientVector::new(values)
    }
}

impl From<GradientVector> for Vec<f64> {
    fn from(g: GradientVector) -> Self {
        g.values
    }
}

impl AsRef<[f64]> for GradientVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub fn l2_norm_sq(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

pub fn l2_norm(values: &[f64]) -> f64 {
    l2_norm_sq(values).sqrt()
}

pub fn linf_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Squared Euclidean distance between two equal-length slices.
pub fn dist_sq(a: &[f64], b: &[f64]) -> Result<f64> {
    crate::error::ensure_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(GradientVector::new(vec![]), Err(Error::Empty));
        assert!(matches!(
            GradientVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            GradientVector::new(vec![f64::NEG_INFINITY]),
            Err(Error::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn norms_of_small_vectors() {
        let zero = GradientVector::zeros(3);
        assert_eq!(zero.l2_norm(), 0.0);
        assert_eq!(GradientVector::zeros(1).linf_norm(), 0.0);
        assert_eq!(GradientVector::new(vec![3.0, 4.0]).unwrap().l2_norm(), 5.0);
        assert_eq!(
            GradientVector::new(vec![-2.0, 1.0]).unwrap().linf_norm(),
            2.0
        );
    }

    #[test]
    fn norms_match_naive_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..500);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let g = GradientVector::new(v.clone()).unwrap();

            let mut acc = 0.0;
            for x in &v {
                acc += x * x;
            }
            let naive = acc.sqrt();
            assert!((g.l2_norm() - naive).abs() <= 1e-12 * naive.max(1.0));

            let mut max = 0.0_f64;
            for x in &v {
                if x.abs() > max {
                    max = x.abs();
                }
            }
            assert_eq!(g.linf_norm(), max);
        }
    }
}
