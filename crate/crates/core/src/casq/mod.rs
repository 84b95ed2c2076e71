//! Cluster-aware sketch quantization (CASQ).
//!
//! Each worker clusters its compensated gradient with a shared model, inserts
//! the entries of every cluster into that cluster's averaged sketch and sends
//! the per-bucket means together with its cluster labels. The server adds
//! bucket means and one-hot label rows across workers and decodes every
//! entry as the vote-weighted average of its bucket means:
//!
//! ```text
//! S = (1/W) Σ_i S^i          C = Σ_i C^i
//! g_hat(j) = (1/W) Σ_k C[j,k] · S[k][h_k(j)]
//! ```
//!
//! Workers in the same clustering window share the model, the per-cluster
//! bucket budgets and the hash seeds, which is what makes payloads mergeable.

mod codec;
mod feedback;
mod payload;
mod window;

pub use codec::{
    cas_comm_bits, cas_cost, merged_downstream_bits, nominal_downstream_ratio, CasCost, CAS_MAGIC,
    CAS_VERSION,
};
pub use feedback::{ef_step, EfOutcome, ErrorState};
pub use payload::{cas_compress, cas_decompress, cas_merge, AssignmentCode, CasPayload};
pub use window::{cluster_seed, CasConfig, CasSession, CasWindow};
