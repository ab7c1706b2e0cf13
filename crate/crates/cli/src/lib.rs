//! Harness behind the `deft` binary: config files, metrics output, training
//! runs, projector timing, rank sweeps and the verification suite.

pub mod bench;
pub mod config;
pub mod metrics;
pub mod run;
pub mod sweep;
pub mod verify;

use thiserror::Error;

pub use config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(deft_core::Error),
    #[error("{detail}")]
    Diverged { step: u64, detail: String },
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 config or I/O, 2 divergence, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Usage(_) | CliError::Core(_) => 1,
            CliError::Diverged { .. } => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<deft_core::Error> for CliError {
    fn from(e: deft_core::Error) -> Self {
        match e {
            deft_core::Error::Diverged { step, detail } => CliError::Diverged {
                step,
                detail: format!("diverged at step {step}: {detail}"),
            },
            other => CliError::Core(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
