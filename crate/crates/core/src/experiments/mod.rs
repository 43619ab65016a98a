//! Synthetic data sets and experiment runners.
//!
//! An [`ExperimentConfig`] is read from TOML and expanded into one solver
//! run per data size, warm start and residual schedule, plus an optional
//! lRCPA run per size. Runs are independent and execute in parallel.

mod config;
mod data;
mod runner;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{DatasetConfig, ExperimentConfig, ExperimentKind, LrcpaSection, ModelConfig, SolverSection};
pub use data::{
    add_noise, exact_rof_minimizer, gen_lemniscate, gen_piecewise_signal, gen_sphere_image,
    gen_spd_image, lemniscate_center, rof_delta, sphere_signal_setup, spd_signal_setup,
};
pub use runner::{
    execute, run_experiment, write_datasets, write_report, Dataset, ExperimentSummary, RunReport, RunSpec,
    RunSummary, SolverKind, TargetHit,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trace file: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Whether the error stems from the configuration rather than from
    /// reading or writing files.
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
    }
}
