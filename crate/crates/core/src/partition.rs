use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous block partition of `[0, dim)` into `num_blocks` blocks of
/// `ceil(dim / num_blocks)` entries; the final block may be shorter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    dim: usize,
    num_blocks: usize,
    block_size: usize,
}

impl BlockPartition {
    pub fn new(dim: usize, num_blocks: usize) -> Result<Self> {
        if dim == 0 || num_blocks == 0 {
            return Err(Error::Config(format!(
                "block partition needs dim >= 1 and num_blocks >= 1 (dim={dim}, num_blocks={num_blocks})"
            )));
        }
        if num_blocks > dim {
            return Err(Error::Config(format!(
                "num_blocks={num_blocks} exceeds dim={dim}"
            )));
        }
        let block_size = dim.div_ceil(num_blocks);
        // ceil-sized blocks can run out before the last block, e.g. dim=10, b=6.
        if (num_blocks - 1) * block_size >= dim {
            return Err(Error::Config(format!(
                "dim={dim} split into {num_blocks} blocks of {block_size} leaves empty trailing blocks"
            )));
        }
        Ok(BlockPartition {
            dim,
            num_blocks,
            block_size,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        let start = (block * self.block_size).min(self.dim);
        let end = ((block + 1) * self.block_size).min(self.dim);
        start..end
    }

    pub fn block_of(&self, index: usize) -> usize {
        index / self.block_size
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.num_blocks).map(move |b| self.range(b))
    }
}
