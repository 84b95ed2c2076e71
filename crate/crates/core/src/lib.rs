//! Sketch-based gradient compression for data-parallel SGD.
//!
//! The crate is organized bottom-up:
//!
//! * [`gradient`], [`hash`], [`partition`]: dense vectors, seeded bucket/sign
//!   hash families and contiguous block partitions.
//! * [`quantize`]: two-level stochastic quantizers (QSGD / TernGrad).
//! * [`sketch`]: count-min (bucket-sum query), signed count-sketch (median
//!   query) and averaged-bucket sketches, all mergeable by addition.
//! * [`cluster`]: sampled 1-D k-means, sign-constrained assignment, cluster
//!   statistics and bucket allocation.
//! * [`casq`]: the cluster-aware sketch quantizer: compress, merge across
//!   workers, decompress, error feedback and its wire format.
//! * [`sparse`]: block Top-K sparsification combined with a count-sketch of
//!   the surviving values and a block bitmap.
//! * [`distsim`]: a deterministic multi-worker SGD simulator with parameter
//!   server and ring all-reduce aggregation plus convergence-bound tracking.
//! * [`verify`]: Monte Carlo and exhaustive-enumeration checks of the sketch
//!   moment laws and compressor bounds.

pub mod bitpack;
pub mod casq;
pub mod cluster;
pub mod distsim;
pub mod error;
pub mod gradient;
pub mod hash;
pub mod merge;
pub mod partition;
pub mod quantize;
pub mod rng;
pub mod sketch;
pub mod sparse;
pub mod verify;
mod wire;

pub use error::{Error, Result};
pub use gradient::GradientVector;
pub use hash::{HashKind, HashMapping, HashingMode};
pub use merge::{FlatBuffer, Mergeable};
pub use partition::BlockPartition;
