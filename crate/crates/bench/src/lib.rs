//! Workloads shared by the benchmarks and their smoke tests.

use sketchgrad::casq::{cas_compress, CasConfig, CasPayload, CasWindow};
use sketchgrad::sparse::{SparseConfig, SparsePayload};
use sketchgrad::verify::EntryDistribution;
use sketchgrad::{GradientVector, Result};

/// Per-worker gradients drawn from the default four-component mixture.
pub fn gradients(workers: usize, dim: usize, seed: u64) -> Result<Vec<GradientVector>> {
    (0..workers)
        .map(|i| EntryDistribution::default_mixture().sample(dim, seed.wrapping_add(i as u64)))
        .collect()
}

/// A two-bit CASQ setup with `dim / 64` buckets, windowed on the first
/// gradient.
pub fn casq_setup(gs: &[GradientVector], seed: u64) -> Result<(CasWindow, Vec<CasPayload>)> {
    let dim = gs[0].dim();
    let window = CasWindow::build(&CasConfig::new(4, (dim / 64).max(4), seed), 0, &gs[0])?;
    let payloads = gs
        .iter()
        .map(|g| cas_compress(g, &window, &window.assign(g)))
        .collect::<Result<_>>()?;
    Ok((window, payloads))
}

/// Top 5% of 100 blocks, three rows, half-size table.
pub fn sparse_setup(
    gs: &[GradientVector],
    seed: u64,
) -> Result<(SparseConfig, Vec<SparsePayload>)> {
    let cfg = SparseConfig::new(100, 5, seed);
    let payloads = gs.iter().map(|g| cfg.compress(g)).collect::<Result<_>>()?;
    Ok((cfg, payloads))
}
