use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Physics(#[from] spinqudit::Error),
    #[error("check failed: {0}")]
    Check(String),
    #[error("{failed} calibration fit(s) failed; other results were written")]
    PartialFit { failed: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Physics(e) if e.is_config() => 2,
            CliError::Physics(_) | CliError::Check(_) => 3,
            CliError::Io { .. } => 1,
            CliError::PartialFit { .. } => 4,
        }
    }
}
