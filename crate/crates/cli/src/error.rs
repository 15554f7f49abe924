use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Args(#[from] clap::Error),

    #[error(transparent)]
    Core(#[from] gampinn_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0} run(s) diverged; see the status column of the metrics")]
    Diverged(usize),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 3 for file problems, 4 for
    /// diverged training and 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        use gampinn_core::Error as E;
        match self {
            CliError::Args(e) => e.exit_code(),
            CliError::Config(_) | CliError::Core(E::Usage(_)) => 2,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Core(E::Io(_) | E::Format(_)) => 3,
            CliError::Diverged(_) | CliError::Core(E::NonFinite(_) | E::NonFiniteGradient { .. }) => 4,
            CliError::Core(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}
