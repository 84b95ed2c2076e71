//! Front end for the `sketchgrad` binary: argument and config handling plus
//! one driver per subcommand. Drivers return their outputs instead of
//! writing them so the binary can serialize all writes.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Arg, ArgMatches, Command};
use thiserror::Error;

use config::{RunConfig, KEYS};

/// Name of the environment variable that sets the worker-thread count.
pub const THREADS_ENV: &str = "SKETCHGRAD_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or parameter combination.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
}

impl From<sketchgrad::Error> for CliError {
    fn from(e: sketchgrad::Error) -> Self {
        match e {
            sketchgrad::Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    /// Files to write, in order.
    pub files: Vec<(PathBuf, String)>,
    /// Every check passed.
    pub pass: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    /// Write each file, creating parent directories.
    pub fn write_files(&self) -> Result<(), CliError> {
        for (path, body) in &self.files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| {
                    CliError::Usage(format!("cannot create {}: {e}", parent.display()))
                })?;
            }
            std::fs::write(path, body)
                .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn with_keys(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("Read `key = value` settings from FILE before applying flags"),
    );
    KEYS.iter().fold(cmd, |c, (key, help)| {
        c.arg(Arg::new(*key).long(*key).value_name("VALUE").help(*help))
    })
}

pub fn command() -> Command {
    Command::new("sketchgrad")
        .about("Sketch-based gradient compression: verification suites, SGD simulation and cost tables")
        .after_help(format!("Set {THREADS_ENV} to fix the worker-thread count."))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_keys(
            Command::new("verify").about("Check sketch moment laws and compressor bounds"),
        ))
        .subcommand(with_keys(
            Command::new("train").about("Run the distributed SGD simulator and write its trace"),
        ))
        .subcommand(with_keys(
            Command::new("bench-comm").about("Tabulate payload sizes per compressor and dimension"),
        ))
        .subcommand(with_keys(
            Command::new("topk").about("Check the block Top-K energy bound on random vectors"),
        ))
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(matches: &ArgMatches) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        cfg.apply_file(std::path::Path::new(path))?;
    }
    for (key, _) in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

/// Run an already parsed command line.
pub fn run_matches(matches: &ArgMatches) -> Result<Outcome, CliError> {
    let (name, sub) = matches
        .subcommand()
        .ok_or_else(|| CliError::Usage("missing subcommand".into()))?;
    let cfg = resolve_config(sub)?;
    match name {
        "verify" => commands::verify(&cfg),
        "train" => commands::train(&cfg),
        "bench-comm" => commands::bench_comm(&cfg),
        "topk" => commands::topk(&cfg),
        other => Err(CliError::Usage(format!("unknown subcommand {other}"))),
    }
}

/// Parse `args` (program name first) and run.
pub fn run_args<I, T>(args: I) -> Result<Outcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command()
        .try_get_matches_from(args)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    run_matches(&matches)
}

/// Size the global rayon pool from [`THREADS_ENV`] if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Run(format!("thread pool: {e}")))
}
