//! Command-line shell around `biascope-core`: config file formats, an HTTP
//! translation adapter with pacing and retries, a disk response cache, and
//! report rendering. Everything IO-flavored lives here so the core crate
//! stays `no_std`-compatible.

pub mod cache;
pub mod commands;
pub mod config;
pub mod fsutil;
pub mod httpsvc;
pub mod report;

use biascope_core::engine::EngineError;

/// CLI-level error carrying its process exit code: 2 for configuration and
/// usage problems, 4 for runtime failures such as exhausted retries.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError::Runtime(message.into())
    }
}

/// Maps engine failures onto exit-code classes: probe execution failures
/// are runtime errors, everything else points at bad configuration.
pub fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::Service(_) | EngineError::AllLanguagesFailed => CliError::Runtime(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}
