//! File-based front end: TOML run configs, CSV data, JSON model files and
//! text/JSON reports. The `serls` binary is a thin wrapper over
//! [`commands`].

pub mod commands;
pub mod config;
pub mod data;
pub mod model_file;
pub mod report;

use std::path::PathBuf;

pub use commands::{fit, mc, predict, FitOptions, McOptions, PredictOptions};
pub use config::RunConfig;
pub use model_file::{ModelFile, MODEL_SCHEMA};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for numerical failures (infeasible constraints, QP failure,
    /// degenerate variance), 2 for everything the user can fix in the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
