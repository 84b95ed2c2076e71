use crate::error::{ensure_dim, Error, Result};
use crate::gradient::GradientVector;
use crate::hash::{derive_seed, HashMapping};
use crate::merge::{FlatBuffer, Mergeable};

/// `rows x cols` signed count-sketch. Row `j` hashes with its own mapping
/// derived from `(seed, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketchTable {
    rows: usize,
    cols: usize,
    dim: usize,
    seed: u64,
    mappings: Vec<HashMapping>,
    /// row-major
    table: Vec<f64>,
}

impl CountSketchTable {
    pub fn new(dim: usize, rows: usize, cols: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty);
        }
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!(
                "count-sketch needs rows >= 1 and cols >= 1 (rows={rows}, cols={cols})"
            )));
        }
        let mappings = (0..rows)
            .map(|j| HashMapping::signed(derive_seed(&[seed, j as u64]), cols))
            .collect::<Result<Vec<_>>>()?;
        Ok(CountSketchTable {
            rows,
            cols,
            dim,
            seed,
            mappings,
            table: vec![0.0; rows * cols],
        })
    }

    /// Single-row table whose row hashes with `mapping` (e.g. an injective
    /// identity mapping for lossless configurations).
    pub fn single_row(dim: usize, mapping: HashMapping, seed: u64) -> Result<Self> {
        let mut sk = Self::new(dim, 1, mapping.buckets(), seed)?;
        sk.mappings[0] = mapping;
        Ok(sk)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row_mapping(&self, row: usize) -> &HashMapping {
        &self.mappings[row]
    }

    pub fn is_zero(&self) -> bool {
        self.table.iter().all(|&v| v == 0.0)
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.dim {
            Err(Error::IndexOutOfRange {
                index,
                dim: self.dim,
            })
        } else {
            Ok(())
        }
    }

    /// `table[j][h_j(index)] += s_j(index) * value` for every row `j`.
    pub fn insert(&mut self, index: usize, value: f64) -> Result<()> {
        self.check_index(index)?;
        for (j, h) in self.mappings.iter().enumerate() {
            self.table[j * self.cols + h.bucket(index)] += h.sign(index) * value;
        }
        Ok(())
    }

    pub fn insert_vector(&mut self, g: &GradientVector) -> Result<()> {
        ensure_dim(self.dim, g.dim())?;
        for (i, &v) in g.as_slice().iter().enumerate() {
            if v != 0.0 {
                self.insert(i, v)?;
            }
        }
        Ok(())
    }

    /// Per-row sign-corrected estimates for `index`.
    pub fn row_estimates(&self, index: usize) -> Result<Vec<f64>> {
        self.check_index(index)?;
        Ok(self
            .mappings
            .iter()
            .enumerate()
            .map(|(j, h)| h.sign(index) * self.table[j * self.cols + h.bucket(index)])
            .collect())
    }

    /// Median of the per-row estimates (lower median for even `rows`).
    pub fn query(&self, index: usize) -> Result<f64> {
        let mut est = self.row_estimates(index)?;
        Ok(median_lower(&mut est))
    }

    pub(crate) fn set_table(&mut self, table: Vec<f64>) -> Result<()> {
        ensure_dim(self.table.len(), table.len())?;
        self.table = table;
        Ok(())
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        for (field, a, b) in [
            ("dim", self.dim as u64, other.dim as u64),
            ("rows", self.rows as u64, other.rows as u64),
            ("cols", self.cols as u64, other.cols as u64),
            ("seed", self.seed, other.seed),
        ] {
            if a != b {
                return Err(Error::incompatible(field, a, b));
            }
        }
        if self.mappings != other.mappings {
            return Err(Error::incompatible("row mappings", "custom", "custom"));
        }
        Ok(())
    }
}

/// Element at position `floor((n - 1) / 2)` of the sorted values; sorts in
/// place.
pub fn median_lower(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

impl Mergeable for CountSketchTable {
    fn merge_from(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.table.iter_mut().zip(&other.table) {
            *a += b;
        }
        Ok(())
    }
}

impl FlatBuffer for CountSketchTable {
    fn to_flat(&self) -> Vec<f64> {
        self.table.clone()
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_table(flat.to_vec())?;
        Ok(out)
    }
}
