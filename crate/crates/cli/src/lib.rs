//! Command-line front end for editforge: corpus generation, frame
//! rendering, statistics, evaluation and guidance demos.

pub mod commands;
pub mod config;
pub mod evaluate;
pub mod generate;
pub mod manifest;
pub mod stats;

use std::path::Path;

pub use commands::{run, Cli};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// Unreadable or inconsistent dataset files (bad JSON, tampered frames).
    #[error("data: {0}")]
    Data(String),
    #[error("evaluation incomplete: {0}")]
    Incomplete(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Data(_) => 3,
            CliError::Incomplete(_) => 4,
        }
    }
}
