//! Experiment runner: TOML configs in, `report.json` and CSV tables out.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, Kind};
pub use output::{resolve_out_dir, write_outputs, OUT_DIR_ENV};
pub use run::{run, RunOutput, FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}
