use sketchgrad::casq::CasConfig;
use sketchgrad::distsim::{
    run_sim, trace_csv, CompressorSpec, ErrorMode, ProblemKind, ProblemSpec, ReportSummary,
    SimConfig, StepSize, Topology,
};
use sketchgrad::sparse::SparseConfig;

use super::json;
use crate::config::{CompressorKind, RunConfig};
use crate::{CliError, Outcome};

/// Simulator configuration described by `cfg`.
pub fn sim_config(cfg: &RunConfig) -> Result<SimConfig, CliError> {
    let kind = match cfg.problem.as_str() {
        "logistic" => ProblemKind::Logistic,
        _ => ProblemKind::LeastSquares,
    };
    let problem = ProblemSpec {
        kind,
        dim: cfg.dim,
        rows_per_worker: cfg.rows_per_worker,
        noise: cfg.noise,
        seed: cfg.seed,
    };
    let compressor = match cfg.compressor {
        CompressorKind::Identity => CompressorSpec::Identity,
        CompressorKind::Qsgd => CompressorSpec::Qsgd,
        CompressorKind::TernGrad => CompressorSpec::TernGrad,
        CompressorKind::Casq => {
            let k = cfg.num_clusters();
            CompressorSpec::Casq(CasConfig {
                refresh_interval: cfg.refresh,
                ..CasConfig::new(k, cfg.buckets.unwrap_or((cfg.dim / 8).max(k)), cfg.seed)
            })
        }
        CompressorKind::Sparse => CompressorSpec::Sparse(SparseConfig {
            rows: cfg.rows,
            lambda: cfg.lambda,
            ..SparseConfig::new(cfg.blocks, cfg.topk_blocks, cfg.seed)
        }),
    };
    let mut sim = SimConfig::new(problem, cfg.workers, cfg.iterations, compressor);
    sim.step = match cfg.lr {
        Some(eta) => StepSize::Fixed(eta),
        None => StepSize::OverSmoothness(cfg.lr_scale),
    };
    sim.rho = cfg.rho;
    sim.topology = match cfg.topology.as_str() {
        "ring" => Topology::RingAllReduce,
        _ => Topology::ParameterServer,
    };
    sim.error_mode = match cfg.error_mode.as_str() {
        "merged" => ErrorMode::Merged,
        _ => ErrorMode::Worker,
    };
    sim.seed = cfg.seed;
    sim.validate()?;
    Ok(sim)
}

/// Run the simulator. With `--out DIR` the trace goes to `DIR/trace.csv`
/// and the summary to `DIR/summary.json`; otherwise the summary is printed.
pub fn train(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sim = sim_config(cfg)?;
    let report = run_sim(&sim)?;
    let summary = ReportSummary::from_report(&report);
    let pass = summary.checks.all_hold();
    let body = json(&summary);
    Ok(match &cfg.out {
        Some(dir) => Outcome {
            stdout: format!(
                "final grad_norm_sq {:e}, delta_hat {:.6}, bound_holds {}\n",
                summary.final_grad_norm_sq, summary.delta_hat, summary.bound_holds
            ),
            files: vec![
                (dir.join("trace.csv"), trace_csv(&report)),
                (dir.join("summary.json"), body),
            ],
            pass,
        },
        None => Outcome {
            stdout: body,
            files: Vec::new(),
            pass,
        },
    })
}
