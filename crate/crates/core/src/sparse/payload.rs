use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::gradient::GradientVector;
use crate::hash::{HashMapping, HashingMode};
use crate::merge::{FlatBuffer, Mergeable};
use crate::partition::BlockPartition;
use crate::sketch::CountSketchTable;

use super::mask::{block_topk, BlockMask};

pub const DEFAULT_ROWS: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Columns per row for a total budget of `lambda * alpha * dim` cells split
/// over `rows` rows: `max(1, ceil(lambda * alpha * dim / rows))`.
pub fn sketch_columns(dim: usize, alpha: f64, rows: usize, lambda: f64) -> usize {
    let cells = lambda * alpha * dim as f64;
    ((cells / rows.max(1) as f64).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseConfig {
    pub num_blocks: usize,
    pub topk_blocks: usize,
    pub rows: usize,
    pub lambda: f64,
    pub seed: u64,
    pub hashing: HashingMode,
}

impl SparseConfig {
    pub fn new(num_blocks: usize, topk_blocks: usize, seed: u64) -> Self {
        SparseConfig {
            num_blocks,
            topk_blocks,
            rows: DEFAULT_ROWS,
            lambda: DEFAULT_LAMBDA,
            seed,
            hashing: HashingMode::Random,
        }
    }

    /// One injective row of `dim` columns.
    pub fn lossless(num_blocks: usize, topk_blocks: usize) -> Self {
        SparseConfig {
            rows: 1,
            lambda: 1.0,
            hashing: HashingMode::Identity,
            ..Self::new(num_blocks, topk_blocks, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topk_blocks == 0 || self.topk_blocks > self.num_blocks {
            return Err(Error::Config(format!(
                "top-k needs 1 <= K <= b (K={}, b={})",
                self.topk_blocks, self.num_blocks
            )));
        }
        if self.rows == 0 {
            return Err(Error::Config("sketch rows must be >= 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.hashing == HashingMode::Identity && self.rows != 1 {
            return Err(Error::Config("identity hashing uses a single row".into()));
        }
        Ok(())
    }

    /// Nominal non-zero fraction `K / b` every worker sizes its sketch by.
    pub fn alpha(&self) -> f64 {
        self.topk_blocks as f64 / self.num_blocks as f64
    }

    pub fn columns(&self, dim: usize) -> usize {
        match self.hashing {
            HashingMode::Identity => dim,
            HashingMode::Random => sketch_columns(dim, self.alpha(), self.rows, self.lambda),
        }
    }

    pub fn partition(&self, dim: usize) -> Result<BlockPartition> {
        BlockPartition::new(dim, self.num_blocks)
    }

    pub fn empty_sketch(&self, dim: usize) -> Result<CountSketchTable> {
        match self.hashing {
            HashingMode::Random => {
                CountSketchTable::new(dim, self.rows, self.columns(dim), self.seed)
            }
            HashingMode::Identity => {
                CountSketchTable::single_row(dim, HashMapping::identity(dim)?, self.seed)
            }
        }
    }

    /// Top-K selection followed by [`sparse_compress`].
    pub fn compress(&self, g: &GradientVector) -> Result<SparsePayload> {
        self.validate()?;
        let mask = block_topk(g, &self.partition(g.dim())?, self.topk_blocks)?;
        sparse_compress(g, &mask, self)
    }
}

/// Block mask plus a count-sketch of the masked entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePayload {
    pub(crate) mask: BlockMask,
    pub(crate) sketch: CountSketchTable,
}

impl SparsePayload {
    pub fn new(mask: BlockMask, sketch: CountSketchTable) -> Result<Self> {
        ensure_dim(mask.partition().dim(), sketch.dim())?;
        Ok(SparsePayload { mask, sketch })
    }

    pub fn mask(&self) -> &BlockMask {
        &self.mask
    }

    pub fn sketch(&self) -> &CountSketchTable {
        &self.sketch
    }

    pub fn dim(&self) -> usize {
        self.sketch.dim()
    }

    /// Fraction of entries inside the mask.
    pub fn alpha(&self) -> f64 {
        self.mask.density()
    }

    /// Sketch cells per masked entry, `r c / (alpha d)`; `None` for an
    /// empty mask.
    pub fn lambda(&self) -> Option<f64> {
        let selected = self.mask.selected_len();
        (selected > 0).then(|| (self.sketch.rows() * self.sketch.cols()) as f64 / selected as f64)
    }
}

/// Insert every non-zero entry of the selected blocks into a fresh sketch.
pub fn sparse_compress(
    g: &GradientVector,
    mask: &BlockMask,
    config: &SparseConfig,
) -> Result<SparsePayload> {
    ensure_dim(mask.partition().dim(), g.dim())?;
    let mut sketch = config.empty_sketch(g.dim())?;
    let values = g.as_slice();
    for blk in mask.selected_blocks() {
        for i in mask.partition().range(blk) {
            if values[i] != 0.0 {
                sketch.insert(i, values[i])?;
            }
        }
    }
    SparsePayload::new(mask.clone(), sketch)
}

impl Mergeable for SparsePayload {
    fn merge_from(&mut self, other: &Self) -> Result<()> {
        self.sketch.check_compatible(&other.sketch)?;
        self.mask.union_with(&other.mask)?;
        self.sketch.merge_from(&other.sketch)
    }
}

impl FlatBuffer for SparsePayload {
    /// Sketch table followed by one 0/1 count per block; adding counts and
    /// reading `> 0` is the OR of the masks.
    fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.sketch.table().to_vec();
        flat.extend(self.mask.flags().iter().map(|&f| f64::from(u8::from(f))));
        flat
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let cells = self.sketch.table().len();
        ensure_dim(cells + self.mask.flags().len(), flat.len())?;
        let mut sketch = self.sketch.clone();
        sketch.set_table(flat[..cells].to_vec())?;
        let flags = flat[cells..].iter().map(|&v| v > 0.0).collect();
        SparsePayload::new(
            BlockMask::from_flags(*self.mask.partition(), flags)?,
            sketch,
        )
    }
}

pub fn sparse_merge(payloads: &[SparsePayload]) -> Result<SparsePayload> {
    SparsePayload::merge_all(payloads)
}

/// Median count-sketch estimate divided by `workers` inside the merged
/// mask, zero elsewhere.
pub fn sparse_decompress(payload: &SparsePayload, workers: u64) -> Result<GradientVector> {
    if workers == 0 {
        return Err(Error::Config("worker count must be >= 1".into()));
    }
    let w = workers as f64;
    let mut out = vec![0.0; payload.dim()];
    for blk in payload.mask.selected_blocks() {
        for i in payload.mask.partition().range(blk) {
            out[i] = payload.sketch.query(i)? / w;
        }
    }
    GradientVector::new(out)
}
