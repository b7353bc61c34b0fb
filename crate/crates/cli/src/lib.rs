//! Command-line front end of the flux-piston simulator.
//!
//! Every subcommand is a pure function of its configuration and seed: the
//! files it writes are byte-identical across reruns and worker counts.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{Overrides, RunConfig};

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid configuration or input file (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running (exit code 1).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

impl From<piston_core::Error> for CliError {
    fn from(e: piston_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
