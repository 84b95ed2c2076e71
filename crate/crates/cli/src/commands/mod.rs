//! Subcommand drivers.

mod bench;
mod topk;
mod train;
mod verify;

pub use bench::{bench_comm, bench_rows, BenchRow};
pub use topk::topk;
pub use train::{sim_config, train};
pub use verify::verify;

use crate::config::{Format, RunConfig};
use crate::Outcome;

/// Route a rendered report to `--out` or stdout. With `--out`, stdout gets
/// a one-line summary instead.
fn emit(
    cfg: &RunConfig,
    default: Format,
    json: String,
    table: String,
    summary: String,
    pass: bool,
) -> Outcome {
    let body = match cfg.format.unwrap_or(default) {
        Format::Json => json,
        Format::Table => table,
    };
    match &cfg.out {
        Some(path) => Outcome {
            stdout: summary,
            files: vec![(path.clone(), body)],
            pass,
        },
        None => Outcome {
            stdout: body,
            files: Vec::new(),
            pass,
        },
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
