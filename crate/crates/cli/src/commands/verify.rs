use sketchgrad::casq::CasConfig;
use sketchgrad::quantize::NormKind;
use sketchgrad::sparse::SparseConfig;
use sketchgrad::verify::{
    cas_oracle_gap, casq_delta, cm_oracle_agreement, cs_unbiasedness, mc_cas_moments,
    mc_cm_moments, quantizer_unbiasedness, topk_min_margin, CheckLine, EntryDistribution,
    VerifyReport,
};

use super::emit;
use crate::config::{Format, RunConfig, Suite};
use crate::{CliError, Outcome};

/// Entries tracked by the unbiasedness checks.
const TRACKED: usize = 16;
/// Vector length for the compressor-constant checks.
const DELTA_DIM: usize = 4096;
/// Block configurations for the Top-K energy check.
const TOPK_CASES: [(usize, usize); 3] = [(4, 1), (16, 4), (32, 8)];

fn tracked_indices(selected: &[usize]) -> Vec<usize> {
    let step = selected.len().div_ceil(TRACKED).max(1);
    selected.iter().step_by(step).copied().collect()
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut report = VerifyReport::new();
    let seed = cfg.seed;

    if cfg.suite.includes(Suite::Cm) {
        let m = cfg.m.unwrap_or(64);
        let r = mc_cm_moments(
            cfg.n,
            m,
            cfg.mu.unwrap_or(0.1),
            cfg.sigma.unwrap_or(0.05),
            cfg.trials.unwrap_or(10_000),
            seed,
        )?;
        report.add_moments(&r);
        let a = cm_oracle_agreement(cfg.oracle_instances, 6, 3, seed)?;
        report.push(CheckLine {
            check: format!("count-min oracle gap ({} instances)", a.instances),
            expected: 0.0,
            observed: a.max_mean_gap.max(a.max_variance_gap),
            tolerance: "1e-12 abs".into(),
            pass: a.within(1e-12),
        });
    }

    if cfg.suite.includes(Suite::Cas) {
        let m = cfg.m.unwrap_or(16);
        if m == 0 || m > cfg.nk {
            return Err(CliError::Usage(format!(
                "CASQ check needs 1 <= m <= nk (m={m}, nk={})",
                cfg.nk
            )));
        }
        let r = mc_cas_moments(
            cfg.nk,
            m,
            cfg.mu.unwrap_or(0.2),
            cfg.sigma.unwrap_or(0.1),
            cfg.gj,
            cfg.trials.unwrap_or(100_000),
            seed,
        )?;
        report.add_cas(&r);
        let small: Vec<f64> = (0..8)
            .map(|i| 0.2 + 0.05 * ((i * 5 % 8) as f64 - 3.5))
            .collect();
        let gap = cas_oracle_gap(&small, 2, 0)?;
        report.push(CheckLine {
            check: "averaged-sketch exact variance (N_k=8, m=2), reported".into(),
            expected: gap.formula_variance,
            observed: gap.exact.variance,
            tolerance: format!("ratio {:.3}", gap.variance_ratio),
            pass: true,
        });
    }

    if cfg.suite.includes(Suite::Sketch) {
        let trials = cfg.trials.unwrap_or(100_000);
        let g = EntryDistribution::Gaussian {
            mean: 0.0,
            std: 1.0,
        }
        .sample(cfg.dim, seed)?;
        let sparse = SparseConfig {
            rows: cfg.rows,
            lambda: cfg.lambda,
            ..SparseConfig::new(cfg.blocks, cfg.topk_blocks, seed)
        };
        let mask = sparse.compress(&g)?.mask().clone();
        let selected: Vec<usize> = (0..cfg.dim).filter(|&i| mask.contains(i)).collect();
        let r = cs_unbiasedness(&g, &sparse, &tracked_indices(&selected), trials, seed)?;
        report.add_bias(&r);
        let all: Vec<usize> = (0..cfg.dim).collect();
        for norm in [NormKind::L2, NormKind::LInf] {
            let r = quantizer_unbiasedness(&g, norm, &tracked_indices(&all), trials, seed)?;
            report.add_bias(&r);
        }
    }

    if cfg.suite.includes(Suite::Delta) {
        let k = cfg.num_clusters();
        let buckets = cfg.buckets.unwrap_or(DELTA_DIM / 64);
        let r = casq_delta(
            DELTA_DIM,
            &CasConfig::new(k, buckets, seed),
            &EntryDistribution::default_mixture(),
            cfg.trials.unwrap_or(1000),
            seed,
        )?;
        report.add_delta("casq", &r.estimate);
        report.push(CheckLine {
            check: "casq max m_k/N_k".into(),
            expected: 1.0 / 16.0,
            observed: r.max_bucket_ratio,
            tolerance: "<= 1/16".into(),
            pass: r.max_bucket_ratio <= 1.0 / 16.0,
        });
        let dist = EntryDistribution::Gaussian {
            mean: 0.0,
            std: 1.0,
        };
        for (b, kb) in TOPK_CASES {
            let margin = topk_min_margin(8 * b, b, kb, &dist, cfg.trials.unwrap_or(1000), seed)?;
            report.push(CheckLine {
                check: format!("top-{kb} of {b} blocks energy margin"),
                expected: 0.0,
                observed: margin,
                tolerance: ">= 0".into(),
                pass: margin >= 0.0,
            });
        }
    }

    let failed = report.lines.iter().filter(|l| !l.pass).count();
    let summary = format!("{} checks, {failed} failed\n", report.lines.len());
    let mut json = report.to_json();
    json.push('\n');
    Ok(emit(
        cfg,
        Format::Json,
        json,
        report.render_table(),
        summary,
        report.all_pass(),
    ))
}
