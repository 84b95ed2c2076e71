//! Statistical checks: Monte Carlo moments of the sketch estimators against
//! their closed forms, exhaustive enumeration oracles for tiny inputs,
//! unbiasedness tests and compressor-constant estimates.

mod cas;
mod cm;
mod delta;
mod dist;
mod report;
mod stats;
mod unbiased;

pub use cas::{
    cas_loss_mean, cas_loss_variance, cas_oracle_gap, exhaustive_cas_oracle, mc_cas_moments,
    CasMomentReport, CasOracleGap,
};
pub use cm::{
    cm_closed_form, cm_loss_mean, cm_loss_variance, cm_oracle_agreement, exhaustive_cm_oracle,
    mc_cm_moments, EntryMoments, MomentReport, OracleAgreement, MAX_ENUMERATION,
};
pub use delta::{casq_delta, delta_estimate, topk_min_margin, CasDeltaReport, DeltaEstimate};
pub use dist::EntryDistribution;
pub use report::{CheckLine, VerifyReport};
pub use stats::{compensated_sum, run_trials, trial_seed, within_rel, within_se, SampleStats, Z95};
pub use unbiased::{cs_unbiasedness, quantizer_unbiasedness, BiasReport, IndexBias};
