//! Experiment harness behind the `nce` binary.
//!
//! Each subcommand reads one JSON [`config::ExperimentConfig`] and writes its
//! artifacts into `output_dir`. Every artifact starts with the resolved
//! config and the master seed: JSON reports carry them as top-level keys,
//! CSV files as `# ` preamble lines before the header.

pub mod analyze;
pub mod check;
pub mod config;
pub mod data;
pub mod fit;
pub mod output;
pub mod rate;
pub mod sweep;

use std::path::PathBuf;

use nce_core::NceError;
use thiserror::Error;

use crate::config::{ExperimentConfig, ExperimentKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<NceError> for CliError {
    fn from(e: NceError) -> Self {
        match e {
            NceError::Config(_) | NceError::Argument(_) | NceError::Domain(_) | NceError::Unsupported(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::CheckFailed(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Test hook: flip the sign of one ζ-function inside the check suites.
    pub inject_zeta_sign_fault: bool,
}

/// Parse, validate and run one experiment; returns the written file paths.
pub fn run(cmd: ExperimentKind, cfg: ExperimentConfig, ov: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = cfg;
    if cfg.experiment != cmd {
        return Err(CliError::Config(format!(
            "config declares experiment `{}` but the command is `{}`",
            cfg.experiment.as_str(),
            cmd.as_str()
        )));
    }
    if let Some(s) = ov.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &ov.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    match cmd {
        ExperimentKind::Fit => fit::cmd_fit(&cfg),
        ExperimentKind::CondnceSweep => sweep::cmd_condnce_sweep(&cfg),
        ExperimentKind::RateSweep => rate::cmd_rate_sweep(&cfg),
        ExperimentKind::Check => check::cmd_check(&cfg, ov.inject_zeta_sign_fault),
        ExperimentKind::Analyze => analyze::cmd_analyze(&cfg),
    }
}
