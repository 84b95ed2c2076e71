//! Sparse sketch: block Top-K sparsification, a block bitmap and a signed
//! count-sketch of the surviving values.
//!
//! Workers select their `K` heaviest blocks, insert only those entries into a
//! shared `r x c` count-sketch and send the table with a one-bit-per-block
//! mask. Payloads merge by adding tables and OR-ing masks, so the merged
//! payload is the sketch of the summed sparse gradients on the union mask.

mod codec;
mod mask;
mod payload;

pub use codec::{
    coordinate_format_bits, sparse_comm_bits, sparse_cost, SparseCost, SPARSE_MAGIC, SPARSE_VERSION,
};
pub use mask::{block_norms_sq, block_topk, sparsify, topk_delta_check, BlockMask, TopkEnergy};
pub use payload::{
    sketch_columns, sparse_compress, sparse_decompress, sparse_merge, SparseConfig, SparsePayload,
    DEFAULT_LAMBDA, DEFAULT_ROWS,
};
