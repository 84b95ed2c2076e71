use crate::error::{ensure_dim, Error, Result};
use crate::hash::HashMapping;
use crate::merge::{FlatBuffer, Mergeable};

/// Bucket sums with occupancy counts. The stored value of bucket `j` is the
/// mean of every value inserted there, i.e. `Counter ⊙ (A^T g)` with
/// `Counter = diag((A^T A)^{-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedSketch {
    sums: Vec<f64>,
    counts: Vec<u32>,
    mapping: HashMapping,
    dim: usize,
}

impl AveragedSketch {
    pub fn new(dim: usize, mapping: HashMapping) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty);
        }
        Ok(AveragedSketch {
            sums: vec![0.0; mapping.buckets()],
            counts: vec![0; mapping.buckets()],
            mapping,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mapping(&self) -> &HashMapping {
        &self.mapping
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn buckets(&self) -> usize {
        self.sums.len()
    }

    /// Insert `(index, value)` pairs. Indices must be unique within the
    /// subset and below `dim`.
    pub fn insert(&mut self, subset: &[(usize, f64)]) -> Result<()> {
        let increasing = subset.windows(2).all(|w| w[0].0 < w[1].0);
        let max_index = if increasing {
            subset.last().map(|&(i, _)| i)
        } else {
            let mut seen: Vec<usize> = subset.iter().map(|&(i, _)| i).collect();
            seen.sort_unstable();
            if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateIndex(w[0]));
            }
            seen.last().copied()
        };
        if let Some(index) = max_index.filter(|&i| i >= self.dim) {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim,
            });
        }
        for &(i, v) in subset {
            let b = self.mapping.bucket(i);
            self.sums[b] += v;
            self.counts[b] += 1;
        }
        Ok(())
    }

    /// Mean of bucket `bucket`; empty buckets read as zero.
    pub fn mean(&self, bucket: usize) -> f64 {
        match self.counts[bucket] {
            0 => 0.0,
            c => self.sums[bucket] / f64::from(c),
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.buckets()).map(|b| self.mean(b)).collect()
    }

    /// Mean of the bucket `index` hashes to.
    pub fn query(&self, index: usize) -> Result<f64> {
        if index >= self.dim {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim,
            });
        }
        Ok(self.mean(self.mapping.bucket(index)))
    }

    pub(crate) fn from_parts(
        dim: usize,
        mapping: HashMapping,
        sums: Vec<f64>,
        counts: Vec<u32>,
    ) -> Result<Self> {
        ensure_dim(mapping.buckets(), sums.len())?;
        ensure_dim(mapping.buckets(), counts.len())?;
        Ok(AveragedSketch {
            sums,
            counts,
            mapping,
            dim,
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::incompatible("dim", self.dim, other.dim));
        }
        if self.mapping != other.mapping {
            return Err(Error::incompatible(
                "mapping",
                format!("{:?}", self.mapping),
                format!("{:?}", other.mapping),
            ));
        }
        Ok(())
    }
}

impl Mergeable for AveragedSketch {
    fn merge_from(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

impl FlatBuffer for AveragedSketch {
    fn to_flat(&self) -> Vec<f64> {
        self.sums
            .iter()
            .copied()
            .chain(self.counts.iter().map(|&c| f64::from(c)))
            .collect()
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let m = self.buckets();
        ensure_dim(2 * m, flat.len())?;
        let counts = flat[m..].iter().map(|&c| c as u32).collect();
        Self::from_parts(self.dim, self.mapping, flat[..m].to_vec(), counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_give_constant_means() {
        for seed in 0..20 {
            let mut sk =
                AveragedSketch::new(50, HashMapping::bucket_only(seed, 7).unwrap()).unwrap();
            let subset: Vec<_> = (0..50).map(|i| (i, 2.5)).collect();
            sk.insert(&subset).unwrap();
            for b in 0..7 {
                if sk.counts()[b] > 0 {
                    assert_eq!(sk.mean(b), 2.5);
                }
            }
        }
    }

    #[test]
    fn injective_buckets_hold_single_values() {
        let mut sk = AveragedSketch::new(4, HashMapping::identity(4).unwrap()).unwrap();
        sk.insert(&[(0, 1.0), (1, -2.0), (3, 5.0)]).unwrap();
        assert_eq!(sk.means(), vec![1.0, -2.0, 0.0, 5.0]);
        assert_eq!(sk.query(3).unwrap(), 5.0);
    }

    #[test]
    fn colliding_pair_averages() {
        let mut sk = AveragedSketch::new(2, HashMapping::bucket_only(3, 1).unwrap()).unwrap();
        sk.insert(&[(0, 1.0), (1, 3.0)]).unwrap();
        assert_eq!(sk.mean(0), 2.0);
        assert_eq!(sk.counts(), &[2]);
    }

    #[test]
    fn duplicate_and_out_of_range_rejected() {
        let mut sk = AveragedSketch::new(5, HashMapping::bucket_only(3, 2).unwrap()).unwrap();
        assert_eq!(
            sk.insert(&[(1, 1.0), (1, 2.0)]),
            Err(Error::DuplicateIndex(1))
        );
        assert!(matches!(
            sk.insert(&[(5, 1.0)]),
            Err(Error::IndexOutOfRange { .. })
        ));
        // failed inserts leave the sketch untouched
        assert!(sk.sums().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn empty_bucket_mean_is_zero() {
        let sk = AveragedSketch::new(5, HashMapping::bucket_only(3, 4).unwrap()).unwrap();
        assert_eq!(sk.means(), vec![0.0; 4]);
    }
}
