use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sim::{CheckSummary, ConvergenceReport, SimConfig};

/// Per-iteration trace with columns `t, f, grad_norm_sq, err_norm_sq_<i>
/// (one per worker), bound, bytes`. An unavailable bound is left empty.
pub fn trace_csv(report: &ConvergenceReport) -> String {
    let w = report.sigma_hat.len();
    let mut out = String::from("t,f,grad_norm_sq");
    for i in 0..w {
        let _ = write!(out, ",err_norm_sq_{i}");
    }
    out.push_str(",bound,bytes\n");
    for r in &report.records {
        let _ = write!(out, "{},{:e},{:e}", r.t, r.f, r.grad_norm_sq);
        for e in &r.err_norm_sq {
            let _ = write!(out, ",{e:e}");
        }
        match r.bound {
            Some(b) => {
                let _ = write!(out, ",{b:e}");
            }
            None => out.push(','),
        }
        let _ = writeln!(out, ",{}", r.bytes);
    }
    out
}

/// Run constants and final metrics, without the per-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub schema_version: u32,
    pub config: SimConfig,
    pub lr: f64,
    pub rho: f64,
    pub smoothness: f64,
    pub f0: f64,
    pub f_star: f64,
    pub delta_hat: f64,
    pub sigma_hat: Vec<f64>,
    pub sigma_sq: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub final_f: f64,
    pub final_grad_norm_sq: f64,
    pub min_grad_norm_sq: f64,
    pub max_recursion_residual: f64,
    pub total_bytes: u64,
    pub checks: CheckSummary,
    pub bound_holds: bool,
}

impl ReportSummary {
    pub fn from_report(r: &ConvergenceReport) -> Self {
        let last = r.records.last();
        ReportSummary {
            schema_version: r.schema_version,
            config: r.config.clone(),
            lr: r.lr,
            rho: r.rho,
            smoothness: r.smoothness,
            f0: r.f0,
            f_star: r.f_star,
            delta_hat: r.delta_hat,
            sigma_hat: r.sigma_hat.clone(),
            sigma_sq: r.sigma_sq,
            a: r.a,
            b: r.b,
            final_f: last.map_or(f64::NAN, |l| l.f),
            final_grad_norm_sq: r.final_grad_norm_sq(),
            min_grad_norm_sq: r
                .records
                .iter()
                .map(|x| x.grad_norm_sq)
                .fold(f64::INFINITY, f64::min),
            max_recursion_residual: r.max_recursion_residual(),
            total_bytes: r.total_bytes(),
            checks: r.checks,
            bound_holds: r.checks.all_hold(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
