//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags. Every key is also a long flag of the same name.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Every recognized key with its flag help text.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "Master seed for every random stream"),
    (
        "out",
        "Output path (file for verify/bench-comm/topk, directory for train)",
    ),
    ("format", "Report format: json or table"),
    ("suite", "Verification suite: cm, cas, sketch, delta or all"),
    ("trials", "Monte Carlo trials per check"),
    ("n", "Count-min vector length N"),
    ("m", "Buckets per sketch in the moment checks"),
    ("nk", "CASQ cluster size N_k"),
    ("mu", "Mean of the Gaussian entries"),
    ("sigma", "Standard deviation of the Gaussian entries"),
    ("gj", "Pinned value of the tracked CASQ entry"),
    (
        "oracle-instances",
        "Random instances for the exhaustive count-min oracle",
    ),
    ("compressor", "identity, qsgd, terngrad, casq or sparse"),
    ("clusters", "CASQ cluster count K"),
    (
        "bits",
        "CASQ bits per entry (K = 2^bits); overrides clusters",
    ),
    ("buckets", "CASQ total buckets M"),
    ("refresh", "CASQ clustering refresh interval"),
    ("blocks", "Sparse-sketch block count b"),
    ("topk-blocks", "Sparse-sketch blocks kept per worker K"),
    ("rows", "Sparse-sketch rows r"),
    ("lambda", "Sparse-sketch size ratio r*c/(alpha*d)"),
    ("alpha", "Kept fraction for the sparse rows of bench-comm"),
    ("sizes", "Comma-separated vector lengths for bench-comm"),
    ("problem", "least-squares or logistic"),
    ("dim", "Model dimension d"),
    ("rows-per-worker", "Data rows held by each worker"),
    ("noise", "Label noise level"),
    ("workers", "Worker count W"),
    ("iterations", "SGD iterations T"),
    ("lr", "Fixed step size; overrides lr-scale"),
    ("lr-scale", "Step size as a multiple of 1/L"),
    ("rho", "Descent-lemma parameter rho (default L)"),
    ("topology", "ps or ring"),
    ("error-mode", "worker or merged"),
];

/// Section headers accepted in a config file. Sections group keys for
/// readability; any key may appear under any of them.
pub const SECTIONS: &[&str] = &[
    "general",
    "verify",
    "compressor",
    "problem",
    "train",
    "bench",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Cm,
    Cas,
    Sketch,
    Delta,
    All,
}

impl Suite {
    pub fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorKind {
    Identity,
    Qsgd,
    TernGrad,
    Casq,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,

    pub suite: Suite,
    pub trials: Option<usize>,
    pub n: usize,
    pub m: Option<usize>,
    pub nk: usize,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub gj: f64,
    pub oracle_instances: usize,

    pub compressor: CompressorKind,
    pub clusters: usize,
    pub bits: Option<u32>,
    pub buckets: Option<usize>,
    pub refresh: usize,
    pub blocks: usize,
    pub topk_blocks: usize,
    pub rows: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub sizes: Vec<usize>,

    pub problem: String,
    pub dim: usize,
    pub rows_per_worker: usize,
    pub noise: f64,
    pub workers: usize,
    pub iterations: usize,
    pub lr: Option<f64>,
    pub lr_scale: f64,
    pub rho: Option<f64>,
    pub topology: String,
    pub error_mode: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: None,
            format: None,
            suite: Suite::All,
            trials: None,
            n: 1024,
            m: None,
            nk: 256,
            mu: None,
            sigma: None,
            gj: 0.35,
            oracle_instances: 50,
            compressor: CompressorKind::Casq,
            clusters: 4,
            bits: None,
            buckets: None,
            refresh: sketchgrad::cluster::DEFAULT_REFRESH_INTERVAL,
            blocks: 20,
            topk_blocks: 4,
            rows: sketchgrad::sparse::DEFAULT_ROWS,
            lambda: sketchgrad::sparse::DEFAULT_LAMBDA,
            alpha: 0.05,
            sizes: vec![10_000, 100_000, 1_000_000, 10_000_000],
            problem: "least-squares".into(),
            dim: 200,
            rows_per_worker: 500,
            noise: 0.1,
            workers: 4,
            iterations: 500,
            lr: None,
            lr_scale: 0.5,
            rho: None,
            topology: "ps".into(),
            error_mode: "worker".into(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| CliError::Usage(format!("bad value {value:?} for {key}: {e}")))
}

/// Integers may be written as `1e6` as well as `1000000`.
fn parse_count(key: &str, value: &str) -> Result<usize, CliError> {
    let v = value.trim();
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    let f: f64 = parse(key, v)?;
    if f >= 0.0 && f.fract() == 0.0 && f <= usize::MAX as f64 {
        Ok(f as usize)
    } else {
        Err(CliError::Usage(format!(
            "{key} must be a non-negative integer, got {value:?}"
        )))
    }
}

fn choose<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, CliError> {
    let v = value.trim();
    options
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            CliError::Usage(format!(
                "{key} must be one of {}, got {v:?}",
                names.join(", ")
            ))
        })
}

/// Canonical key spelling: lower case with `-` separators.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = normalize_key(key);
        let k = key.as_str();
        match k {
            "seed" => self.seed = parse(k, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "format" => {
                self.format = Some(choose(
                    k,
                    value,
                    &[("json", Format::Json), ("table", Format::Table)],
                )?)
            }
            "suite" => {
                self.suite = choose(
                    k,
                    value,
                    &[
                        ("cm", Suite::Cm),
                        ("cas", Suite::Cas),
                        ("sketch", Suite::Sketch),
                        ("delta", Suite::Delta),
                        ("all", Suite::All),
                    ],
                )?
            }
            "trials" => self.trials = Some(parse_count(k, value)?),
            "n" => self.n = parse_count(k, value)?,
            "m" => self.m = Some(parse_count(k, value)?),
            "nk" => self.nk = parse_count(k, value)?,
            "mu" => self.mu = Some(parse(k, value)?),
            "sigma" => self.sigma = Some(parse(k, value)?),
            "gj" => self.gj = parse(k, value)?,
            "oracle-instances" => self.oracle_instances = parse_count(k, value)?,
            "compressor" => {
                self.compressor = choose(
                    k,
                    value,
                    &[
                        ("identity", CompressorKind::Identity),
                        ("qsgd", CompressorKind::Qsgd),
                        ("terngrad", CompressorKind::TernGrad),
                        ("casq", CompressorKind::Casq),
                        ("sparse", CompressorKind::Sparse),
                    ],
                )?
            }
            "clusters" => self.clusters = parse_count(k, value)?,
            "bits" => self.bits = Some(parse(k, value)?),
            "buckets" => self.buckets = Some(parse_count(k, value)?),
            "refresh" => self.refresh = parse_count(k, value)?,
            "blocks" => self.blocks = parse_count(k, value)?,
            "topk-blocks" => self.topk_blocks = parse_count(k, value)?,
            "rows" => self.rows = parse_count(k, value)?,
            "lambda" => self.lambda = parse(k, value)?,
            "alpha" => self.alpha = parse(k, value)?,
            "sizes" => {
                self.sizes = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_count(k, s))
                    .collect::<Result<_, _>>()?
            }
            "problem" => {
                self.problem = choose(
                    k,
                    value,
                    &[("least-squares", "least-squares"), ("logistic", "logistic")],
                )?
                .to_string()
            }
            "dim" => self.dim = parse_count(k, value)?,
            "rows-per-worker" => self.rows_per_worker = parse_count(k, value)?,
            "noise" => self.noise = parse(k, value)?,
            "workers" => self.workers = parse_count(k, value)?,
            "iterations" => self.iterations = parse_count(k, value)?,
            "lr" => self.lr = Some(parse(k, value)?),
            "lr-scale" => self.lr_scale = parse(k, value)?,
            "rho" => self.rho = Some(parse(k, value)?),
            "topology" => {
                self.topology = choose(k, value, &[("ps", "ps"), ("ring", "ring")])?.to_string()
            }
            "error-mode" => {
                self.error_mode =
                    choose(k, value, &[("worker", "worker"), ("merged", "merged")])?.to_string()
            }
            _ => return Err(CliError::Usage(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply every setting in a config file's text.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (pair, line_no) in parse_config_text(text, origin)? {
            self.set(&pair.0, &pair.1)
                .map_err(|e| CliError::Usage(format!("{origin}:{line_no}: {e}")))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `K`, taking `bits` into account.
    pub fn num_clusters(&self) -> usize {
        match self.bits {
            Some(b) => sketchgrad::cluster::clusters_for_bits(b),
            None => self.clusters,
        }
    }
}

/// A `(key, value)` setting and the line it came from.
pub type Setting = ((String, String), usize);

/// Split config text into `(key, value)` pairs with their line numbers.
/// Blank lines and lines starting with `#` or `;` are skipped; `[name]`
/// opens a section.
pub fn parse_config_text(text: &str, origin: &str) -> Result<Vec<Setting>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    CliError::Usage(format!("{origin}:{line_no}: unterminated section header"))
                })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(CliError::Usage(format!(
                    "{origin}:{line_no}: unknown section [{name}]"
                )));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{origin}:{line_no}: expected `key = value`"))
        })?;
        let value = value.trim().trim_matches('"');
        out.push(((normalize_key(key), value.to_string()), line_no));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("format", "table"),
            ("suite", "cm"),
            ("compressor", "sparse"),
            ("problem", "logistic"),
            ("topology", "ring"),
            ("error-mode", "merged"),
            ("sizes", "10,1e3"),
            ("out", "x.json"),
        ];
        for (key, _) in KEYS {
            let value = samples
                .iter()
                .find(|(k, _)| k == key)
                .map_or("3", |(_, v)| *v);
            RunConfig::default()
                .set(key, value)
                .unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn file_sections_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# c\n[train]\nworkers = 8\n\n[compressor]\ntopk_blocks = 2\nlambda = 0.25\n",
            "t",
        )
        .unwrap();
        assert_eq!((c.workers, c.topk_blocks, c.lambda), (8, 2, 0.25));
    }

    #[test]
    fn bad_lines_are_usage_errors() {
        for text in [
            "[nope]\n",
            "[train\n",
            "workers\n",
            "bogus = 1\n",
            "workers = -1\n",
            "suite = x\n",
        ] {
            assert!(
                matches!(
                    RunConfig::default().apply_text(text, "t"),
                    Err(CliError::Usage(_))
                ),
                "{text:?}"
            );
        }
    }

    #[test]
    fn counts_accept_scientific_notation() {
        let mut c = RunConfig::default();
        c.set("trials", "1e5").unwrap();
        assert_eq!(c.trials, Some(100_000));
        assert!(c.set("trials", "1.5").is_err());
    }

    #[test]
    fn bits_override_clusters() {
        let mut c = RunConfig::default();
        c.set("clusters", "8").unwrap();
        assert_eq!(c.num_clusters(), 8);
        c.set("bits", "1").unwrap();
        assert_eq!(c.num_clusters(), 2);
    }
}
