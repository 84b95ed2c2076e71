use serde::{Deserialize, Serialize};

use super::cas::CasMomentReport;
use super::cm::MomentReport;
use super::delta::DeltaEstimate;
use super::unbiased::BiasReport;

/// One row of a verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub check: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: String,
    pub pass: bool,
}

/// Collected verification results, rendered as JSON or a plain table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, line: CheckLine) {
        self.lines.push(line);
    }

    pub fn add_moments(&mut self, r: &MomentReport) {
        self.push(CheckLine {
            check: format!("{} mean", r.name),
            expected: r.theory_mean,
            observed: r.empirical_mean,
            tolerance: format!("{} SE ({:.3e})", r.mean_k, r.se_mean),
            pass: r.mean_pass,
        });
        self.push(CheckLine {
            check: format!("{} variance", r.name),
            expected: r.theory_variance,
            observed: r.empirical_variance,
            tolerance: format!("{}% rel", r.variance_tol * 100.0),
            pass: r.variance_pass,
        });
    }

    pub fn add_cas(&mut self, r: &CasMomentReport) {
        self.add_moments(&r.loss);
        self.push(CheckLine {
            check: "casq norm gap".into(),
            expected: 0.0,
            observed: r.norm_gap_mean,
            tolerance: format!("<= 3 SE ({:.3e})", r.norm_gap_se),
            pass: r.norm_pass,
        });
    }

    pub fn add_bias(&mut self, r: &BiasReport) {
        self.push(CheckLine {
            check: format!("{} bias (max |z|)", r.name),
            expected: 0.0,
            observed: r.max_abs_z(),
            tolerance: format!("{} SE", r.k),
            pass: r.pass(),
        });
    }

    pub fn add_delta(&mut self, name: &str, d: &DeltaEstimate) {
        self.push(CheckLine {
            check: format!("{name} delta"),
            expected: d.ci_low,
            observed: d.delta_hat,
            tolerance: format!("CI [{:.4}, {:.4}] in (0, 1]", d.ci_low, d.ci_high),
            pass: d.is_compressor(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width text table, one row per check.
    pub fn render_table(&self) -> String {
        let width = self
            .lines
            .iter()
            .map(|l| l.check.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<width$}  {:>13}  {:>13}  {:<28}  result\n",
            "check", "expected", "observed", "tolerance"
        );
        for l in &self.lines {
            out.push_str(&format!(
                "{:<width$}  {:>13.6e}  {:>13.6e}  {:<28}  {}\n",
                l.check,
                l.expected,
                l.observed,
                l.tolerance,
                if l.pass { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}
