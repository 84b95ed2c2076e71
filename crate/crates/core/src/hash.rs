//! Seeded hash families that stand in for the random bucket-indicator matrix.
//!
//! A mapping never materializes the indicator matrix: `bucket(i)` is computed
//! on demand from `(seed, i)` with a 64-bit avalanche mix, so every worker that
//! shares the seed agrees on the mapping without communicating it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const SIGN_BIT: u64 = 1 << 63;

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine several words into one seed. Order matters.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c908, |acc, &p| {
        mix64(acc.wrapping_add(GOLDEN_GAMMA) ^ mix64(p.wrapping_add(GOLDEN_GAMMA)))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashKind {
    BucketOnly,
    BucketAndSign,
    /// `bucket(i) = i mod m` with sign +1. Injective whenever `m >= dim`;
    /// used for lossless configurations.
    Identity,
}

/// How a compressor derives its bucket mappings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashingMode {
    Random,
    /// `bucket(j) = j mod m`; lossless when there is a bucket per entry.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashMapping {
    seed: u64,
    buckets: usize,
    kind: HashKind,
}

impl HashMapping {
    pub fn new(seed: u64, buckets: usize, kind: HashKind) -> Result<Self> {
        if buckets == 0 {
            return Err(Error::Config(
                "hash mapping needs at least one bucket".into(),
            ));
        }
        Ok(HashMapping {
            seed,
            buckets,
            kind,
        })
    }

    pub fn bucket_only(seed: u64, buckets: usize) -> Result<Self> {
        Self::new(seed, buckets, HashKind::BucketOnly)
    }

    pub fn signed(seed: u64, buckets: usize) -> Result<Self> {
        Self::new(seed, buckets, HashKind::BucketAndSign)
    }

    pub fn identity(buckets: usize) -> Result<Self> {
        Self::new(0, buckets, HashKind::Identity)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn kind(&self) -> HashKind {
        self.kind
    }

    #[inline]
    fn raw(&self, index: usize) -> u64 {
        mix64(mix64(self.seed) ^ (index as u64).wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
    }

    /// Bucket id in `[0, buckets)`. The sign bit is excluded from the
    /// reduction so bucket and sign are drawn from disjoint output bits.
    #[inline]
    pub fn bucket(&self, index: usize) -> usize {
        match self.kind {
            HashKind::Identity => index % self.buckets,
            _ => ((self.raw(index) & !SIGN_BIT) % self.buckets as u64) as usize,
        }
    }

    /// `+1.0` or `-1.0`. Always `+1.0` for [`HashKind::BucketOnly`] and
    /// [`HashKind::Identity`].
    #[inline]
    pub fn sign(&self, index: usize) -> f64 {
        match self.kind {
            HashKind::BucketAndSign => {
                if self.raw(index) & SIGN_BIT == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => 1.0,
        }
    }
}

/// Free-function form of [`HashMapping::bucket`].
pub fn seeded_bucket(mapping: &HashMapping, index: usize) -> usize {
    mapping.bucket(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bucket_maps_everything_to_zero() {
        let h = HashMapping::bucket_only(1234, 1).unwrap();
        for i in [0, 1, 7, 1 << 20, usize::MAX / 3] {
            assert_eq!(h.bucket(i), 0);
        }
    }

    #[test]
    fn zero_buckets_rejected() {
        assert!(HashMapping::bucket_only(0, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = HashMapping::signed(99, 37).unwrap();
        let b = HashMapping::signed(99, 37).unwrap();
        for i in 0..1000 {
            assert_eq!(a.bucket(i), b.bucket(i));
            assert_eq!(a.sign(i).to_bits(), b.sign(i).to_bits());
        }
        let c = HashMapping::signed(100, 37).unwrap();
        assert!((0..1000).any(|i| a.bucket(i) != c.bucket(i)));
    }

    #[test]
    fn bucket_histogram_passes_chi_square() {
        // 7 degrees of freedom, upper 0.001 critical value.
        const CRITICAL: f64 = 24.322;
        let m = 8;
        let n = 100_000;
        let h = HashMapping::bucket_only(42, m).unwrap();
        let mut counts = vec![0usize; m];
        for i in 0..n {
            counts[h.bucket(i)] += 1;
        }
        let expected = n as f64 / m as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < CRITICAL, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn signs_are_balanced() {
        let h = HashMapping::signed(5, 16).unwrap();
        let n = 100_000;
        let plus = (0..n).filter(|&i| h.sign(i) > 0.0).count() as f64;
        // 4 standard deviations of a fair binomial.
        assert!((plus - n as f64 / 2.0).abs() < 4.0 * (n as f64 / 4.0).sqrt());
        assert!((0..100).all(|i| h.sign(i).abs() == 1.0));
    }

    #[test]
    fn identity_kind_is_modular() {
        let h = HashMapping::identity(5).unwrap();
        assert_eq!(
            (0..7).map(|i| h.bucket(i)).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4, 0, 1]
        );
        assert_eq!(h.sign(3), 1.0);
    }

    #[test]
    fn derived_seeds_depend_on_order() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_eq!(derive_seed(&[1, 2, 3]), derive_seed(&[1, 2, 3]));
    }
}
