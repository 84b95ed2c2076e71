//! Deterministic data-parallel SGD simulator.
//!
//! Each iteration every worker computes its local gradient, compensates it
//! with its residual (`g_tilde = eta g + e`), compresses, and the payloads
//! are combined by a parameter server or a logical ring all-reduce. The
//! merged estimate moves the shared parameters and the residuals are
//! updated. Alongside the trajectory the simulator tracks the virtual
//! iterate `nu_t = w_t - (1/W) Σ e_t^i`, the per-step descent allowance and
//! the convergence bound evaluated with measured constants.

mod analysis;
mod output;
mod problem;
mod ring;
mod sim;

pub use analysis::{
    delta_cas, error_bound_factor, eval_bound, virtual_iterate, BoundEval, DELTA_FLOOR,
};
pub use output::{trace_csv, ReportSummary};
pub use problem::{Problem, ProblemKind, ProblemSpec};
pub use ring::{allgather_bytes, ring_allreduce, ring_order, DensePayload, RingStats};
pub use sim::{
    run_on, run_sim, CheckSummary, CompressorSpec, ConvergenceReport, ErrorMode, IterationRecord,
    SimConfig, StepSize, Topology, DIVERGENCE_NORM, REPORT_SCHEMA_VERSION,
};
