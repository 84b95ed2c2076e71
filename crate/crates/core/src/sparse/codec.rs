use serde::{Deserialize, Serialize};

use crate::bitpack::{bits_for, pack_bits, unpack_bits};
use crate::error::{Error, Result};
use crate::hash::{HashMapping, HashingMode};
use crate::partition::BlockPartition;
use crate::sketch::CountSketchTable;
use crate::wire::{Reader, Writer};

use super::mask::BlockMask;
use super::payload::SparsePayload;

pub const SPARSE_MAGIC: &[u8; 4] = b"S2SK";
pub const SPARSE_VERSION: u8 = 1;

/// magic, version, d, b, r, c, seed.
const HEADER_BYTES: u64 = 4 + 1 + 8 * 5;

impl SparsePayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(SPARSE_MAGIC);
        w.u8(SPARSE_VERSION);
        w.u64(self.dim() as u64);
        w.u64(self.mask.partition().num_blocks() as u64);
        w.u64(self.sketch.rows() as u64);
        w.u64(self.sketch.cols() as u64);
        w.u64(self.sketch.seed());
        w.bytes(&pack_bits(self.mask.flags()));
        self.sketch.table().iter().for_each(|&v| w.f32(v));
        w.finish()
    }

    /// Parse a payload; `hashing` is shared configuration, not on the wire.
    pub fn from_bytes(bytes: &[u8], hashing: HashingMode) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(SPARSE_MAGIC)?;
        let version = r.u8()?;
        if version != SPARSE_VERSION {
            return Err(Error::Decode(format!("unsupported S2SK version {version}")));
        }
        let dim = r.usize()?;
        let blocks = r.usize()?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let seed = r.u64()?;
        let partition =
            BlockPartition::new(dim, blocks).map_err(|e| Error::Decode(e.to_string()))?;
        let flags = unpack_bits(r.take(blocks.div_ceil(8))?, blocks)?;
        let cells = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Decode("sketch size overflows".into()))?;
        let table = r.f32s(cells)?;
        r.finish()?;
        let mut sketch = match hashing {
            HashingMode::Random => CountSketchTable::new(dim, rows, cols, seed)?,
            HashingMode::Identity if rows == 1 => {
                CountSketchTable::single_row(dim, HashMapping::identity(cols)?, seed)?
            }
            HashingMode::Identity => {
                return Err(Error::Decode("identity hashing needs a single row".into()))
            }
        };
        sketch.set_table(table)?;
        SparsePayload::new(BlockMask::from_flags(partition, flags)?, sketch)
    }
}

/// Wire size of a sparse payload by section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseCost {
    pub header_bits: u64,
    /// Byte-padded bitmap.
    pub bitmap_bits: u64,
    pub value_bits: u64,
}

impl SparseCost {
    pub fn total_bits(&self) -> u64 {
        self.header_bits + self.bitmap_bits + self.value_bits
    }
}

impl SparseCost {
    /// Size of a payload with `num_blocks` blocks and an `rows x cols` table.
    pub fn for_sizes(num_blocks: usize, rows: usize, cols: usize) -> Self {
        SparseCost {
            header_bits: 8 * HEADER_BYTES,
            bitmap_bits: 8 * num_blocks.div_ceil(8) as u64,
            value_bits: 32 * (rows * cols) as u64,
        }
    }
}

pub fn sparse_cost(payload: &SparsePayload) -> SparseCost {
    let sk = payload.sketch();
    SparseCost::for_sizes(
        payload.mask().partition().num_blocks(),
        sk.rows(),
        sk.cols(),
    )
}

/// `8 * to_bytes().len()`.
pub fn sparse_comm_bits(payload: &SparsePayload) -> u64 {
    sparse_cost(payload).total_bits()
}

/// Coordinate-list baseline: a 32-bit value and a `ceil(log2 d)`-bit index
/// per non-zero.
pub fn coordinate_format_bits(nonzeros: usize, dim: usize) -> u64 {
    nonzeros as u64 * (32 + u64::from(bits_for(dim as u64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradient::GradientVector;
    use crate::sparse::SparseConfig;

    fn sample() -> SparsePayload {
        let g =
            GradientVector::new((0..40).map(|i| ((i * 7) % 11) as f64 - 5.0).collect()).unwrap();
        SparseConfig::new(10, 3, 21).compress(&g).unwrap()
    }

    #[test]
    fn layout_and_length() {
        let p = sample();
        let b = p.to_bytes();
        assert_eq!(&b[..4], b"S2SK");
        assert_eq!(u64::from_le_bytes(b[5..13].try_into().unwrap()), 40);
        assert_eq!(8 * b.len() as u64, sparse_comm_bits(&p));
    }

    #[test]
    fn round_trip() {
        let p = sample();
        let back = SparsePayload::from_bytes(&p.to_bytes(), HashingMode::Random).unwrap();
        assert_eq!(back, p);
        let g = GradientVector::new(vec![1.5, -2.0, 0.0, 4.0]).unwrap();
        let lossless = SparseConfig::lossless(2, 1).compress(&g).unwrap();
        let back = SparsePayload::from_bytes(&lossless.to_bytes(), HashingMode::Identity).unwrap();
        assert_eq!(back, lossless);
    }

    #[test]
    fn truncated_and_padded_inputs_fail() {
        let b = sample().to_bytes();
        assert!(SparsePayload::from_bytes(&b[..b.len() - 2], HashingMode::Random).is_err());
        let mut extra = b;
        extra.extend([0, 0]);
        assert!(SparsePayload::from_bytes(&extra, HashingMode::Random).is_err());
    }

    #[test]
    fn value_bits_at_break_even() {
        let g = GradientVector::new((1..=100).map(f64::from).collect()).unwrap();
        let cfg = SparseConfig {
            rows: 1,
            lambda: 1.0,
            ..SparseConfig::new(10, 5, 1)
        };
        let p = cfg.compress(&g).unwrap();
        assert_eq!(sparse_cost(&p).value_bits, 32 * 50);
        let half = SparseConfig { lambda: 0.5, ..cfg }.compress(&g).unwrap();
        assert_eq!(sparse_cost(&half).value_bits, 32 * 25);
    }

    #[test]
    fn coordinate_baseline() {
        assert_eq!(coordinate_format_bits(10, 1024), 10 * 42);
    }
}
