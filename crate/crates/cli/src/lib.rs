//! Library half of the `anatoview` binary. Each subcommand is a plain function
//! so integration tests can drive the same code paths as the executable.

pub mod assets;
pub mod commands;
pub mod parse;

use std::fmt;
use std::process::ExitCode;

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad input files, unusable output locations. Exit 2.
    Usage(String),
    /// A processing stage failed on valid input. Exit 3.
    Pipeline { stage: &'static str, message: String },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn stage(stage: &'static str) -> impl FnOnce(anatoview_core::Error) -> CliError {
        move |e| CliError::Pipeline {
            stage,
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Pipeline { .. } => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Pipeline { stage, message } => write!(f, "{stage} failed: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
