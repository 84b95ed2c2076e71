use serde::Serialize;
use sketchgrad::casq::CasCost;
use sketchgrad::quantize::two_level_bits;
use sketchgrad::sparse::{coordinate_format_bits, sketch_columns, SparseCost};

use super::{emit, json};
use crate::config::{Format, RunConfig};
use crate::{CliError, Outcome};

/// One payload size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub scheme: String,
    pub bits: u64,
    /// Dense 32-bit size over this size.
    pub reduction: f64,
}

fn row(n: usize, scheme: String, bits: u64) -> BenchRow {
    BenchRow {
        n,
        scheme,
        bits,
        reduction: 32.0 * n as f64 / bits as f64,
    }
}

/// Single-worker payload sizes for every length in `cfg.sizes`.
pub fn bench_rows(cfg: &RunConfig) -> Result<Vec<BenchRow>, CliError> {
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(CliError::Usage(format!(
            "alpha must be in (0, 1], got {}",
            cfg.alpha
        )));
    }
    if cfg.lambda.is_nan() || cfg.lambda <= 0.0 || cfg.rows == 0 || cfg.blocks == 0 {
        return Err(CliError::Usage(
            "lambda, rows and blocks must be positive".into(),
        ));
    }
    let buckets = cfg.buckets.unwrap_or(4096);
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        if n < buckets || n < cfg.blocks {
            return Err(CliError::Usage(format!(
                "size {n} is below buckets={buckets} or blocks={}",
                cfg.blocks
            )));
        }
        rows.push(row(n, "dense-32".into(), 32 * n as u64));
        rows.push(row(n, "qsgd".into(), two_level_bits(n)));
        rows.push(row(n, "terngrad".into(), two_level_bits(n)));
        for bits in [2u32, 3] {
            let k = 1usize << bits;
            let cost = CasCost::for_sizes(n, k, buckets, 1).total_bits();
            rows.push(row(n, format!("casq-{bits}bit (K={k}, M={buckets})"), cost));
        }
        let cols = sketch_columns(n, cfg.alpha, cfg.rows, cfg.lambda);
        let sparse = SparseCost::for_sizes(cfg.blocks, cfg.rows, cols).total_bits();
        rows.push(row(
            n,
            format!(
                "sparse (alpha={}, lambda={}, r={})",
                cfg.alpha, cfg.lambda, cfg.rows
            ),
            sparse,
        ));
        let nnz = (cfg.alpha * n as f64).round() as usize;
        rows.push(row(
            n,
            format!("coordinate (alpha={})", cfg.alpha),
            coordinate_format_bits(nnz, n),
        ));
    }
    Ok(rows)
}

pub fn bench_comm(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rows = bench_rows(cfg)?;
    let width = rows.iter().map(|r| r.scheme.len()).max().unwrap_or(6);
    let mut table = format!(
        "{:>10}  {:<width$}  {:>14}  {:>10}\n",
        "n", "scheme", "bits", "reduction"
    );
    for r in &rows {
        table.push_str(&format!(
            "{:>10}  {:<width$}  {:>14}  {:>9.2}x\n",
            r.n, r.scheme, r.bits, r.reduction
        ));
    }
    let summary = format!("{} rows\n", rows.len());
    Ok(emit(cfg, Format::Table, json(&rows), table, summary, true))
}
