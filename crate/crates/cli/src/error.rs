use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Problems with the requested run; exit status 2.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown scenario '{0}' (expected planar_bm, rotated_bm or matrix_diffusion)")]
    UnknownScenario(String),
    #[error("unknown suite '{0}' (expected example1, example2, example3 or all)")]
    UnknownSuite(String),
    #[error("invalid numeric value '{value}' for {key}")]
    InvalidNumeric { key: String, value: String },
    #[error("invalid value '{value}' for {key}")]
    InvalidValue { key: String, value: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("config line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("{0}")]
    Conflict(String),
    #[error("path dump would write about {bytes} bytes, over the {limit}-byte limit")]
    DumpTooLarge { bytes: u64, limit: u64 },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Failures while running; exit status 3.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] skewprod_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}
