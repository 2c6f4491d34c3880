//! Experiment runner for `carnot-nonlocal`.
//!
//! A run reads an [`ExperimentConfig`], executes the named experiments in
//! order and writes one CSV table per experiment plus `summary.json`.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, EXPERIMENTS};
pub use experiments::{describe, run_experiment, run_experiments};
pub use report::{Criterion, ExperimentReport};

use std::path::Path;

/// Runs every experiment of `cfg` and writes the outputs under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ExperimentReport>, RunError> {
    let reports = run_experiments(cfg)?;
    std::fs::create_dir_all(out)?;
    for r in &reports {
        r.write_csv(&out.join(format!("{}.csv", r.experiment)))?;
    }
    report::write_summary(&reports, &out.join("summary.json"))?;
    Ok(reports)
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Io(std::io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(s) => write!(f, "config: {s}"),
            RunError::Io(e) => write!(f, "io: {e}"),
            RunError::Csv(e) => write!(f, "csv: {e}"),
            RunError::Json(e) => write!(f, "json: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Csv(e)
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Json(e)
    }
}

impl From<carnot_nonlocal::Error> for RunError {
    fn from(e: carnot_nonlocal::Error) -> Self {
        RunError::Config(e.to_string())
    }
}
