//! Command-line front end for `qecstep`.
//!
//! ```text
//! qecstep <verify|perturb|synth|protocol> --config <path> [--assert] [--out <dir>] [--seed <u64>] [--verbose-records]
//! ```
//!
//! Every command writes its tables as CSV and a JSON summary into the output
//! directory. With `--assert` the scaling windows of the command are checked
//! and the exit status is 1 if any of them fails. Configuration and usage
//! problems exit with status 2.

pub mod config;
pub mod experiments;
pub mod output;
pub mod verify;

use std::path::PathBuf;

use clap::Parser;

pub use config::{CommandKind, ExperimentConfig};
pub use experiments::{Assertion, CommandOutcome};

/// Environment variable capping the worker threads of parallel sweeps.
pub const THREADS_ENV: &str = "QECSTEP_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] qecstep::Error),
}

#[derive(Debug, Parser)]
#[command(name = "qecstep", version, about = "Error correction in short steps during quantum gates")]
pub struct Cli {
    pub command: CommandKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Check the scaling windows and fail the run if any is missed.
    #[arg(long = "assert")]
    pub assert: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub verbose_records: bool,
}

/// Resolved settings for one invocation.
#[derive(Clone, Debug)]
pub struct RunSettings {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub assert: bool,
}

impl Cli {
    pub fn settings(&self) -> Result<RunSettings, CliError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None if self.command == CommandKind::Verify => ExperimentConfig::parse("command = \"verify\"")?,
            None => return Err(CliError::Usage(format!("{} needs --config <path>", self.command.name()))),
        };
        if config.command != self.command {
            return Err(CliError::Usage(format!(
                "the config is for `{}` but `{}` was requested",
                config.command.name(),
                self.command.name()
            )));
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.verbose_records |= self.verbose_records;
        let out_dir = self.out.clone().or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        Ok(RunSettings { config, out_dir, assert: self.assert })
    }
}

/// Runs the command and returns its outcome; writing happens inside.
pub fn execute(settings: &RunSettings) -> Result<CommandOutcome, CliError> {
    std::fs::create_dir_all(&settings.out_dir).map_err(|e| CliError::Io(settings.out_dir.clone(), e))?;
    match settings.config.command {
        CommandKind::Verify => verify::cmd_verify(settings),
        CommandKind::Perturb => experiments::cmd_perturb(settings),
        CommandKind::Synth => experiments::cmd_synth(settings),
        CommandKind::Protocol => experiments::cmd_protocol(settings),
    }
}

/// Caps the global rayon pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} = {raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}
