//! Batch experiments for trustgames: configuration, seeded parallel trials
//! and CSV/JSON artifacts.
//!
//! An output directory holds `summary.json` (per-condition mean ± standard
//! error), `metrics.csv` (one row per trial and strategy) and
//! `traces/trial_<k>.json`. Identical config and seed give identical bytes.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{validate_config, ConfigError, ExperimentConfig, ExperimentId, Overrides, TrueHuman};
pub use experiments::{csv_header, run_experiment, Artifacts, Results, Summary};
pub use output::{read_summary, write_artifacts};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit code: 2 for configuration and output-location problems,
    /// 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}
