//! Experiment runner for `ips-core`: configuration, deterministic replica
//! fan-out over a worker pool, and CSV/JSON outputs.

pub mod config;
pub mod experiments;
pub mod output;
pub mod pool;

use std::path::Path;
use std::time::{Duration, Instant};

pub use config::{Experiment, ExperimentConfig};
pub use output::{ExperimentResult, Status};
pub use pool::Pool;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("usage error: `{key}`: {msg}")]
    Usage { key: String, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("runtime error: {0}")]
    Runtime(#[from] ips_core::Error),
}

impl LabError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        LabError::Io { path: path.display().to_string(), source }
    }

    /// Process exit code: 2 for usage errors, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage { .. } => 2,
            LabError::Io { .. } | LabError::Runtime(_) => 3,
        }
    }
}

/// Runs an experiment without touching the file system.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, LabError> {
    let pool = Pool::new(config.workers)?;
    experiments::run(config, &pool)
}

/// Runs an experiment, writes its files and reports the wall time, which is
/// kept out of the files so reruns compare equal.
pub fn run_and_write(config: &ExperimentConfig) -> Result<(ExperimentResult, Duration), LabError> {
    let start = Instant::now();
    let result = run_experiment(config)?;
    let wall = start.elapsed();
    result.write(&config.output)?;
    Ok((result, wall))
}
