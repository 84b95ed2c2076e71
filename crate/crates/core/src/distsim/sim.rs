use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casq::{cas_compress, cas_decompress, CasConfig, CasPayload, CasSession};
use crate::error::{Error, Result};
use crate::gradient::{l2_norm_sq, GradientVector};
use crate::hash::derive_seed;
use crate::quantize::TwoLevelQuantizer;
use crate::sparse::{sparse_comm_bits, sparse_decompress, sparsify, SparseConfig, SparsePayload};

use super::analysis::{delta_cas, error_bound_factor, eval_bound, virtual_iterate, DELTA_FLOOR};
use super::problem::{Problem, ProblemSpec};
use super::ring::{allgather_bytes, ring_allreduce, DensePayload};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DIVERGENCE_NORM: f64 = 1e12;

const QUANT_STREAM: u64 = 0x5155_414e;
const RING_STREAM: u64 = 0x5249_4e47;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Workers send to a server that merges, decompresses and broadcasts.
    ParameterServer,
    /// Logical ring all-reduce over the payload buffers.
    RingAllReduce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CompressorSpec {
    Identity,
    Qsgd,
    TernGrad,
    Casq(CasConfig),
    Sparse(SparseConfig),
}

impl CompressorSpec {
    /// Whether payloads merge without decompression.
    pub fn is_mergeable(&self) -> bool {
        !matches!(self, CompressorSpec::Qsgd | CompressorSpec::TernGrad)
    }
}

/// Which residual each worker carries forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorMode {
    /// `e^i = g_tilde^i - g_hat^i - (g_hat - mean_k g_hat^k)`: the worker's own
    /// compression residual plus an equal share of the merge discrepancy.
    /// The worker mean of the residuals is exactly `mean g_tilde - g_hat`.
    Worker,
    /// `e^i = g_tilde^i - g_hat` with the shared merged estimate.
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    Fixed(f64),
    /// `eta = c / L`.
    OverSmoothness(f64),
}

impl StepSize {
    pub fn resolve(self, smoothness: f64) -> f64 {
        match self {
            StepSize::Fixed(eta) => eta,
            StepSize::OverSmoothness(c) => c / smoothness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub workers: usize,
    pub iterations: usize,
    pub step: StepSize,
    /// Young's-inequality parameter of the descent lemma; `None` means `L`.
    pub rho: Option<f64>,
    pub topology: Topology,
    pub compressor: CompressorSpec,
    pub error_mode: ErrorMode,
    pub problem: ProblemSpec,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        problem: ProblemSpec,
        workers: usize,
        iterations: usize,
        compressor: CompressorSpec,
    ) -> Self {
        SimConfig {
            workers,
            iterations,
            step: StepSize::OverSmoothness(0.5),
            rho: None,
            topology: Topology::ParameterServer,
            compressor,
            error_mode: ErrorMode::Worker,
            problem,
            seed: problem.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.iterations == 0 {
            return Err(Error::Config("workers and iterations must be >= 1".into()));
        }
        match self.step {
            StepSize::Fixed(v) | StepSize::OverSmoothness(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(Error::Config(format!(
                    "step size must be positive, got {v}"
                )))
            }
            _ => {}
        }
        if let Some(r) = self.rho {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("rho must be positive, got {r}")));
            }
        }
        match &self.compressor {
            CompressorSpec::Casq(c) => c.validate(),
            CompressorSpec::Sparse(c) => c.validate(),
            _ => Ok(()),
        }
    }
}

/// State at iteration `t`, before the step that produces `w_{t+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `f(w_t)`.
    pub f: f64,
    /// `f(nu_t)`.
    pub f_nu: f64,
    pub grad_norm_sq: f64,
    /// `||e_t^i||^2` for every worker.
    pub err_norm_sq: Vec<f64>,
    /// `||nu_t - w_t||^2 = ||(1/W) Σ e_t^i||^2`.
    pub offset_norm_sq: f64,
    pub delta_cas: f64,
    /// `f(nu_{t+1}) - f(nu_t)`.
    pub descent: f64,
    /// `||nu_{t+1} - (nu_t - eta grad f(w_t))|| / max(1, ||nu_t||)`.
    pub recursion_residual: f64,
    /// Right-hand side of the convergence bound at horizon `t`, once the
    /// constants are known.
    pub bound: Option<f64>,
    /// Bytes moved by the aggregation step.
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub descent_holds: Option<bool>,
    pub error_bound_holds: Option<bool>,
    pub bound_holds: Option<bool>,
}

impl CheckSummary {
    /// No evaluated check failed.
    pub fn all_hold(&self) -> bool {
        [self.descent_holds, self.error_bound_holds, self.bound_holds]
            .iter()
            .all(|c| c.unwrap_or(true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub config: SimConfig,
    pub lr: f64,
    pub rho: f64,
    pub smoothness: f64,
    pub f0: f64,
    pub f_star: f64,
    /// `min over (i, t) of 1 - ||e_{t+1}^i||^2 / ||g_tilde_t^i||^2`, floored.
    pub delta_hat: f64,
    /// `max_t ||grad f_i(w_t)||` per worker.
    pub sigma_hat: Vec<f64>,
    /// `Σ sigma_i^2 / W^2`, so that `W sigma^2` is the worker mean of
    /// `sigma_i^2`.
    pub sigma_sq: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub final_omega: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub checks: CheckSummary,
}

impl ConvergenceReport {
    pub fn final_grad_norm_sq(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.grad_norm_sq)
    }

    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.bytes).sum()
    }

    pub fn max_recursion_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.recursion_residual)
            .fold(0.0, f64::max)
    }

    /// First `t` with `||grad f(w_t)||^2 <= threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.grad_norm_sq <= threshold)
            .map(|r| r.t)
    }

    /// `f(nu_{t+1}) - f(nu_t) <= Delta_t` per step, with a rounding allowance.
    pub fn descent_check(&self) -> Vec<bool> {
        self.records
            .iter()
            .map(|r| r.descent <= r.delta_cas + 1e-12 * r.f_nu.abs().max(1.0))
            .collect()
    }

    /// `||e_t^i / eta||^2 <= 4 (1 - delta) / delta^2 sigma_i^2` per step, all
    /// workers.
    pub fn error_bound_check(&self) -> Vec<bool> {
        let factor = error_bound_factor(self.delta_hat);
        self.records
            .iter()
            .map(|r| {
                r.err_norm_sq.iter().zip(&self.sigma_hat).all(|(&e, &s)| {
                    let lhs = e / (self.lr * self.lr);
                    lhs <= factor * s * s * (1.0 + 1e-9) + 1e-300
                })
            })
            .collect()
    }

    /// `min_{t <= T'} ||grad f(w_t)||^2 <= bound(T')` for every horizon.
    pub fn bound_check(&self) -> Option<Vec<bool>> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.grad_norm_sq);
                r.bound.map(|b| best <= b * (1.0 + 1e-12))
            })
            .collect()
    }
}

struct StepOutcome {
    estimate: Vec<f64>,
    errors: Vec<GradientVector>,
    bytes: u64,
}

/// Merge and account for traffic according to the topology.
fn aggregate<P, F>(
    payloads: &[P],
    topology: Topology,
    ring_seed: u64,
    bytes_of: F,
) -> Result<(P, u64)>
where
    P: crate::merge::FlatBuffer + Send + Sync,
    F: Fn(&P) -> u64,
{
    match topology {
        Topology::ParameterServer => {
            let merged = P::merge_all(payloads)?;
            let up: u64 = payloads.iter().map(&bytes_of).sum();
            let down = bytes_of(&merged) * payloads.len() as u64;
            Ok((merged, up + down))
        }
        Topology::RingAllReduce => {
            let (merged, stats) = ring_allreduce(payloads, Some(ring_seed))?;
            Ok((merged, stats.total_bytes()))
        }
    }
}

fn residuals(
    mode: ErrorMode,
    compensated: &[GradientVector],
    local: &[Vec<f64>],
    merged: &[f64],
) -> Result<Vec<GradientVector>> {
    let w = compensated.len() as f64;
    let d = merged.len();
    let mean_local: Vec<f64> = (0..d)
        .map(|j| local.iter().map(|l| l[j]).sum::<f64>() / w)
        .collect();
    compensated
        .iter()
        .zip(local)
        .map(|(gt, l)| {
            let e = (0..d).map(|j| match mode {
                ErrorMode::Worker => gt.as_slice()[j] - l[j] - (merged[j] - mean_local[j]),
                ErrorMode::Merged => gt.as_slice()[j] - merged[j],
            });
            GradientVector::new(e.collect())
        })
        .collect()
}

struct Simulator<'a> {
    cfg: &'a SimConfig,
    session: Option<CasSession>,
}

impl Simulator<'_> {
    fn step(&mut self, t: usize, compensated: &[GradientVector]) -> Result<StepOutcome> {
        let cfg = self.cfg;
        let w = compensated.len();
        let ring_seed = derive_seed(&[cfg.seed, t as u64, RING_STREAM]);
        let (estimate, local, bytes): (Vec<f64>, Vec<Vec<f64>>, u64) = match &cfg.compressor {
            CompressorSpec::Identity => {
                let payloads: Vec<DensePayload> =
                    compensated.iter().map(DensePayload::new).collect();
                let (merged, bytes) =
                    aggregate(&payloads, cfg.topology, ring_seed, DensePayload::wire_bytes)?;
                let local = compensated.iter().map(|g| g.as_slice().to_vec()).collect();
                (merged.mean()?.into_inner(), local, bytes)
            }
            CompressorSpec::Qsgd | CompressorSpec::TernGrad => {
                let quantized: Vec<_> = compensated
                    .par_iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let seed = derive_seed(&[cfg.seed, t as u64, i as u64, QUANT_STREAM]);
                        let q = if matches!(cfg.compressor, CompressorSpec::Qsgd) {
                            TwoLevelQuantizer::qsgd(seed)
                        } else {
                            TwoLevelQuantizer::terngrad(seed)
                        };
                        q.quantize(g)
                    })
                    .collect();
                let sizes: Vec<u64> = quantized.iter().map(|q| q.bits.div_ceil(8)).collect();
                let local: Vec<Vec<f64>> = quantized
                    .into_iter()
                    .map(|q| q.quantized.into_inner())
                    .collect();
                let d = local[0].len();
                let mean = (0..d)
                    .map(|j| local.iter().map(|l| l[j]).sum::<f64>() / w as f64)
                    .collect();
                (mean, local, allgather_bytes(&sizes))
            }
            CompressorSpec::Casq(_) => {
                let session = self.session.as_mut().expect("session exists for CASQ");
                let window = session.window_for(t, &compensated[0])?.clone();
                let payloads: Vec<CasPayload> = compensated
                    .par_iter()
                    .map(|g| cas_compress(g, &window, &window.assign(g)))
                    .collect::<Result<_>>()?;
                let (merged, bytes) = aggregate(&payloads, cfg.topology, ring_seed, |p| {
                    p.to_bytes().len() as u64
                })?;
                let local = payloads
                    .par_iter()
                    .map(|p| cas_decompress(p).map(GradientVector::into_inner))
                    .collect::<Result<_>>()?;
                (cas_decompress(&merged)?.into_inner(), local, bytes)
            }
            CompressorSpec::Sparse(sc) => {
                let payloads: Vec<SparsePayload> = compensated
                    .par_iter()
                    .map(|g| sc.compress(g))
                    .collect::<Result<_>>()?;
                let (merged, bytes) = aggregate(&payloads, cfg.topology, ring_seed, |p| {
                    sparse_comm_bits(p) / 8
                })?;
                // Memory keeps the exact Top-K residual; sketch noise is
                // zero-mean and goes into the update only.
                let local: Vec<Vec<f64>> = compensated
                    .par_iter()
                    .zip(&payloads)
                    .map(|(g, p)| sparsify(g, p.mask()).map(GradientVector::into_inner))
                    .collect::<Result<_>>()?;
                let exact: Vec<f64> = (0..compensated[0].dim())
                    .map(|j| local.iter().map(|l| l[j]).sum::<f64>() / w as f64)
                    .collect();
                let estimate = sparse_decompress(&merged, w as u64)?.into_inner();
                let errors = residuals(cfg.error_mode, compensated, &local, &exact)?;
                return Ok(StepOutcome {
                    estimate,
                    errors,
                    bytes,
                });
            }
        };
        let errors = residuals(cfg.error_mode, compensated, &local, &estimate)?;
        Ok(StepOutcome {
            estimate,
            errors,
            bytes,
        })
    }
}

/// Run error-feedback SGD for `cfg.iterations` steps and evaluate the
/// descent, residual and convergence bounds on the trace.
pub fn run_sim(cfg: &SimConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let problem = cfg.problem.build(cfg.workers)?;
    run_on(cfg, &problem)
}

/// [`run_sim`] on an already materialized problem.
pub fn run_on(cfg: &SimConfig, problem: &Problem) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if problem.workers() != cfg.workers {
        return Err(Error::Config(format!(
            "problem has {} shards for {} workers",
            problem.workers(),
            cfg.workers
        )));
    }
    let smoothness = problem.smoothness();
    let lr = cfg.step.resolve(smoothness);
    let rho = cfg.rho.unwrap_or(smoothness);
    let d = problem.dim();
    let w = cfg.workers;
    let session = match &cfg.compressor {
        CompressorSpec::Casq(c) => Some(CasSession::new(c.clone())?),
        _ => None,
    };
    let mut sim = Simulator { cfg, session };

    let mut omega = vec![0.0; d];
    let mut errors = vec![GradientVector::zeros(d); w];
    let mut nu = omega.clone();
    let mut f_nu = problem.value(&nu);
    let f0 = problem.value(&omega);
    let mut sigma_hat = vec![0.0f64; w];
    let mut delta_hat = f64::INFINITY;
    let mut records = Vec::with_capacity(cfg.iterations + 1);

    for t in 0..=cfg.iterations {
        let norm = l2_norm_sq(&omega).sqrt();
        if norm.is_nan() || norm > DIVERGENCE_NORM {
            return Err(Error::Diverged { iteration: t, norm });
        }
        let grad = problem.gradient(&omega);
        let local_grads: Vec<Vec<f64>> = (0..w)
            .into_par_iter()
            .map(|i| problem.local_gradient(i, &omega))
            .collect();
        for (s, g) in sigma_hat.iter_mut().zip(&local_grads) {
            *s = s.max(l2_norm_sq(g).sqrt());
        }
        let grad_norm_sq = l2_norm_sq(&grad);
        let offset_norm_sq = l2_norm_sq(
            &nu.iter()
                .zip(&omega)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let mut record = IterationRecord {
            t,
            f: problem.value(&omega),
            f_nu,
            grad_norm_sq,
            err_norm_sq: errors.iter().map(GradientVector::l2_norm_sq).collect(),
            offset_norm_sq,
            delta_cas: delta_cas(lr, rho, smoothness, grad_norm_sq, offset_norm_sq),
            descent: 0.0,
            recursion_residual: 0.0,
            bound: None,
            bytes: 0,
        };
        if t == cfg.iterations {
            // final state only; no step is taken from it
            record.delta_cas = 0.0;
            records.push(record);
            break;
        }

        let compensated: Vec<GradientVector> = local_grads
            .into_iter()
            .zip(&errors)
            .map(|(g, e)| GradientVector::new(g)?.scale(lr)?.add(e))
            .collect::<Result<_>>()?;
        let out = sim.step(t, &compensated)?;
        for (gt, e) in compensated.iter().zip(&out.errors) {
            let g2 = gt.l2_norm_sq();
            if g2 > 0.0 {
                delta_hat = delta_hat.min(1.0 - e.l2_norm_sq() / g2);
            }
        }
        for (o, g) in omega.iter_mut().zip(&out.estimate) {
            *o -= g;
        }
        errors = out.errors;
        let next_nu = virtual_iterate(&omega, &errors);
        let next_f_nu = problem.value(&next_nu);
        let expected: Vec<f64> = nu.iter().zip(&grad).map(|(n, g)| n - lr * g).collect();
        let gap = l2_norm_sq(
            &next_nu
                .iter()
                .zip(&expected)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        )
        .sqrt();
        record.recursion_residual = gap / l2_norm_sq(&nu).sqrt().max(1.0);
        record.descent = next_f_nu - f_nu;
        record.bytes = out.bytes;
        records.push(record);
        nu = next_nu;
        f_nu = next_f_nu;
    }

    let delta_hat = if delta_hat.is_finite() {
        delta_hat.clamp(DELTA_FLOOR, 1.0)
    } else {
        1.0
    };
    let sigma_sq = sigma_hat.iter().map(|s| s * s).sum::<f64>() / (w * w) as f64;
    let f_star = problem.f_star();
    let constants = eval_bound(smoothness, rho, lr, delta_hat, sigma_sq, w, 0, f0, f_star).ok();
    if constants.is_some() {
        for r in &mut records {
            r.bound = eval_bound(smoothness, rho, lr, delta_hat, sigma_sq, w, r.t, f0, f_star)
                .ok()
                .map(|e| e.bound);
        }
    }
    let mut report = ConvergenceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        lr,
        rho,
        smoothness,
        f0,
        f_star,
        delta_hat,
        sigma_hat,
        sigma_sq,
        a: constants.map(|c| c.a),
        b: constants.map(|c| c.b),
        final_omega: omega,
        records,
        checks: CheckSummary {
            descent_holds: None,
            error_bound_holds: None,
            bound_holds: None,
        },
    };
    let step_ok = 2.0 - (rho + smoothness) * lr > 0.0;
    report.checks = CheckSummary {
        descent_holds: step_ok.then(|| report.descent_check().into_iter().all(|b| b)),
        error_bound_holds: Some(report.error_bound_check().into_iter().all(|b| b)),
        bound_holds: report.bound_check().map(|v| v.into_iter().all(|b| b)),
    };
    Ok(report)
}
