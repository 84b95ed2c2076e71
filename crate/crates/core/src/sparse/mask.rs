use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::gradient::{l2_norm_sq, GradientVector};
use crate::partition::BlockPartition;

/// One flag per block of a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMask {
    partition: BlockPartition,
    flags: Vec<bool>,
}

impl BlockMask {
    pub fn empty(partition: BlockPartition) -> Self {
        BlockMask {
            partition,
            flags: vec![false; partition.num_blocks()],
        }
    }

    pub fn full(partition: BlockPartition) -> Self {
        BlockMask {
            partition,
            flags: vec![true; partition.num_blocks()],
        }
    }

    pub fn from_flags(partition: BlockPartition, flags: Vec<bool>) -> Result<Self> {
        ensure_dim(partition.num_blocks(), flags.len())?;
        Ok(BlockMask { partition, flags })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn popcount(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_selected(&self, block: usize) -> bool {
        self.flags[block]
    }

    pub fn contains(&self, index: usize) -> bool {
        self.flags[self.partition.block_of(index)]
    }

    pub fn selected_blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(b, _)| b)
    }

    /// Entries covered by selected blocks.
    pub fn selected_len(&self) -> usize {
        self.selected_blocks()
            .map(|b| self.partition.range(b).len())
            .sum()
    }

    /// Fraction of entries covered, `alpha`.
    pub fn density(&self) -> f64 {
        self.selected_len() as f64 / self.partition.dim() as f64
    }

    /// Bitwise OR.
    pub fn union_with(&mut self, other: &BlockMask) -> Result<()> {
        if self.partition != other.partition {
            return Err(Error::incompatible(
                "partition",
                format!("{:?}", self.partition),
                format!("{:?}", other.partition),
            ));
        }
        for (a, &b) in self.flags.iter_mut().zip(&other.flags) {
            *a |= b;
        }
        Ok(())
    }
}

/// Squared L2 norm of every block.
pub fn block_norms_sq(g: &[f64], partition: &BlockPartition) -> Vec<f64> {
    partition.ranges().map(|r| l2_norm_sq(&g[r])).collect()
}

/// Flag the `k` blocks with the largest L2 norm; equal norms prefer the
/// lower block index.
pub fn block_topk(g: &GradientVector, partition: &BlockPartition, k: usize) -> Result<BlockMask> {
    ensure_dim(partition.dim(), g.dim())?;
    let b = partition.num_blocks();
    if k == 0 || k > b {
        return Err(Error::Config(format!(
            "top-k needs 1 <= K <= b (K={k}, b={b})"
        )));
    }
    let norms = block_norms_sq(g.as_slice(), partition);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let mut flags = vec![false; b];
    for &blk in &order[..k] {
        flags[blk] = true;
    }
    BlockMask::from_flags(*partition, flags)
}

/// `g` with every entry outside the mask zeroed.
pub fn sparsify(g: &GradientVector, mask: &BlockMask) -> Result<GradientVector> {
    ensure_dim(mask.partition().dim(), g.dim())?;
    let mut out = vec![0.0; g.dim()];
    for blk in mask.selected_blocks() {
        let r = mask.partition().range(blk);
        out[r.clone()].copy_from_slice(&g.as_slice()[r]);
    }
    GradientVector::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopkEnergy {
    /// `||sparse(g)||^2 / ||g||^2`, or 1 for a zero gradient.
    pub ratio: f64,
    /// `K / b`.
    pub bound: f64,
}

impl TopkEnergy {
    pub fn holds(&self) -> bool {
        self.ratio >= self.bound
    }
}

/// Energy kept by block Top-K against its guaranteed fraction `K/b`.
pub fn topk_delta_check(g: &GradientVector, num_blocks: usize, k: usize) -> Result<TopkEnergy> {
    let partition = BlockPartition::new(g.dim(), num_blocks)?;
    let mask = block_topk(g, &partition, k)?;
    let total = g.l2_norm_sq();
    let kept: f64 = block_norms_sq(g.as_slice(), &partition)
        .iter()
        .zip(mask.flags())
        .filter(|(_, &f)| f)
        .map(|(n, _)| n)
        .sum();
    Ok(TopkEnergy {
        ratio: if total == 0.0 { 1.0 } else { kept / total },
        bound: k as f64 / num_blocks as f64,
    })
}
