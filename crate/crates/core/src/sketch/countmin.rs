use crate::error::{ensure_dim, Error, Result};
use crate::gradient::GradientVector;
use crate::hash::HashMapping;
use crate::merge::{FlatBuffer, Mergeable};

#[derive(Debug, Clone, PartialEq)]
pub struct CountMinArray {
    buckets: Vec<f64>,
    mapping: HashMapping,
    dim: usize,
}

impl CountMinArray {
    pub fn new(dim: usize, buckets: usize, seed: u64) -> Result<Self> {
        Self::with_mapping(dim, HashMapping::bucket_only(seed, buckets)?)
    }

    pub fn with_mapping(dim: usize, mapping: HashMapping) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty);
        }
        Ok(CountMinArray {
            buckets: vec![0.0; mapping.buckets()],
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

    pub fn buckets(&self) -> &[f64] {
        &self.buckets
    }

    /// `buckets += A^T g`
    pub fn insert(&mut self, g: &GradientVector) -> Result<()> {
        ensure_dim(self.dim, g.dim())?;
        for (i, &v) in g.as_slice().iter().enumerate() {
            self.buckets[self.mapping.bucket(i)] += v;
        }
        Ok(())
    }

    /// Sum of the bucket `index` falls in.
    pub fn query_index(&self, index: usize) -> Result<f64> {
        if index >= self.dim {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim,
            });
        }
        Ok(self.buckets[self.mapping.bucket(index)])
    }

    /// `g_hat = A A^T g`
    pub fn query(&self) -> GradientVector {
        let values = (0..self.dim)
            .map(|i| self.buckets[self.mapping.bucket(i)])
            .collect();
        GradientVector::new(values).expect("bucket sums are finite")
    }

    pub(crate) fn from_parts(dim: usize, mapping: HashMapping, buckets: Vec<f64>) -> Self {
        CountMinArray {
            buckets,
            mapping,
            dim,
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::incompatible("dim", self.dim, other.dim));
        }
        if self.mapping.buckets() != other.mapping.buckets() {
            return Err(Error::incompatible(
                "buckets",
                self.mapping.buckets(),
                other.mapping.buckets(),
            ));
        }
        if self.mapping.seed() != other.mapping.seed() {
            return Err(Error::incompatible(
                "seed",
                self.mapping.seed(),
                other.mapping.seed(),
            ));
        }
        if self.mapping.kind() != other.mapping.kind() {
            return Err(Error::incompatible(
                "hash kind",
                format!("{:?}", self.mapping.kind()),
                format!("{:?}", other.mapping.kind()),
            ));
        }
        Ok(())
    }
}

impl Mergeable for CountMinArray {
    fn merge_from(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.buckets.iter_mut().zip(&other.buckets) {
            *a += b;
        }
        Ok(())
    }
}

impl FlatBuffer for CountMinArray {
    fn to_flat(&self) -> Vec<f64> {
        self.buckets.clone()
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        ensure_dim(self.buckets.len(), flat.len())?;
        Ok(Self::from_parts(self.dim, self.mapping, flat.to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gv(v: &[f64]) -> GradientVector {
        GradientVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_insert_is_noop() {
        let mut sk = CountMinArray::new(4, 3, 1).unwrap();
        sk.insert(&GradientVector::zeros(4)).unwrap();
        assert!(sk.buckets().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn single_bucket_collects_everything() {
        let mut sk = CountMinArray::new(2, 1, 9).unwrap();
        sk.insert(&gv(&[1.0, 2.0])).unwrap();
        assert_eq!(sk.buckets(), &[3.0]);
        assert_eq!(sk.query().as_slice(), &[3.0, 3.0]);
    }

    #[test]
    fn insert_equals_explicit_transpose_product() {
        let g = [1.0, 2.0, 3.0];
        for seed in 0..20 {
            let mut sk = CountMinArray::new(3, 2, seed).unwrap();
            sk.insert(&gv(&g)).unwrap();
            // materialize A (3x2) and multiply A^T g
            let h = *sk.mapping();
            let mut a = [[0.0; 2]; 3];
            for (i, row) in a.iter_mut().enumerate() {
                row[h.bucket(i)] = 1.0;
            }
            for j in 0..2 {
                let expect: f64 = (0..3).map(|i| a[i][j] * g[i]).sum();
                assert_eq!(sk.buckets()[j], expect);
            }
        }
    }

    #[test]
    fn injective_mapping_is_identity_projection() {
        let g = gv(&[0.5, -1.0, 2.0, 4.0]);
        let mut sk = CountMinArray::with_mapping(4, HashMapping::identity(4).unwrap()).unwrap();
        sk.insert(&g).unwrap();
        assert_eq!(sk.query(), g);
    }

    #[test]
    fn dim_mismatch_and_bad_index() {
        let mut sk = CountMinArray::new(3, 2, 0).unwrap();
        assert!(matches!(
            sk.insert(&gv(&[1.0])),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            sk.query_index(3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn merge_rejects_different_seed() {
        let mut a = CountMinArray::new(3, 2, 0).unwrap();
        let b = CountMinArray::new(3, 2, 1).unwrap();
        assert!(matches!(
            a.merge_from(&b),
            Err(Error::Incompatible { field: "seed", .. })
        ));
    }
}
