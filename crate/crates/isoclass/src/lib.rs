//! Experiment runner around `isoclass-core`: configs, reports, binary dumps.

pub mod config;
pub mod container;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::ExperimentConfig;
pub use experiments::{run_experiment, Outcome};
pub use report::{write_report, Report};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Path { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("{}: parent directory does not exist", .0.display())]
    MissingParent(PathBuf),
    #[error("malformed container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IoError {
    pub fn path(path: &Path, source: std::io::Error) -> Self {
        Self::Path { path: path.to_path_buf(), source }
    }

    pub fn csv(path: &Path, e: csv::Error) -> Self {
        Self::Csv { path: path.to_path_buf(), message: e.to_string() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl RunError {
    /// Process exit code: 2 for config problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 1,
        }
    }
}

/// Run a config and write `<out>/<experiment>.json`, its CSV tables and any dumps.
pub fn execute(config: &ExperimentConfig, out_dir: &Path, timestamps: bool) -> Result<Report, RunError> {
    let start = Instant::now();
    let Outcome { mut report, dumps } = run_experiment(config)?;
    if timestamps {
        report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
        report.timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| IoError::path(out_dir, e))?;
    for (suffix, c) in &dumps {
        c.write(&out_dir.join(format!("{}.{suffix}.bin", report.experiment)))?;
    }
    write_report(&report, &out_dir.join(format!("{}.json", report.experiment)))?;
    Ok(report)
}
