use serde::Serialize;
use sketchgrad::gradient::GradientVector;
use sketchgrad::sparse::topk_delta_check;
use sketchgrad::verify::{topk_min_margin, EntryDistribution};

use super::{emit, json};
use crate::config::{Format, RunConfig};
use crate::{CliError, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TopkReport {
    dim: usize,
    blocks: usize,
    topk_blocks: usize,
    trials: usize,
    bound: f64,
    /// Smallest `||sparse(g)||^2/||g||^2 - K/b` over the random vectors.
    min_margin: f64,
    /// Energy ratio on a vector with equal block energies.
    tight_ratio: f64,
    pass: bool,
}

/// Check `||sparse(g)||^2 >= (K/b) ||g||^2` on random Gaussian vectors and
/// equality on a vector with uniform block energies.
pub fn topk(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let trials = cfg.trials.unwrap_or(1000);
    let dist = EntryDistribution::Gaussian {
        mean: 0.0,
        std: 1.0,
    };
    let min_margin = topk_min_margin(
        cfg.dim,
        cfg.blocks,
        cfg.topk_blocks,
        &dist,
        trials,
        cfg.seed,
    )?;
    let uniform_dim = cfg.blocks * cfg.dim.div_ceil(cfg.blocks).max(1);
    let tight = topk_delta_check(
        &GradientVector::new(vec![1.0; uniform_dim])?,
        cfg.blocks,
        cfg.topk_blocks,
    )?;
    let r = TopkReport {
        dim: cfg.dim,
        blocks: cfg.blocks,
        topk_blocks: cfg.topk_blocks,
        trials,
        bound: tight.bound,
        min_margin,
        tight_ratio: tight.ratio,
        pass: min_margin >= 0.0 && (tight.ratio - tight.bound).abs() <= 1e-12,
    };
    let table = format!(
        "K/b = {}/{} = {:.6}\nmin margin over {} vectors: {:.6e}\nuniform-energy ratio: {:.15} ({})\n",
        r.topk_blocks,
        r.blocks,
        r.bound,
        r.trials,
        r.min_margin,
        r.tight_ratio,
        if r.pass { "PASS" } else { "FAIL" }
    );
    let summary = format!(
        "top-k energy bound {}\n",
        if r.pass { "holds" } else { "violated" }
    );
    Ok(emit(cfg, Format::Table, json(&r), table, summary, r.pass))
}
