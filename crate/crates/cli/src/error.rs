use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] attn2d_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Core(e) => match e {
                attn2d_core::Error::Config(_)
                | attn2d_core::Error::Layout(_)
                | attn2d_core::Error::Infeasible { .. }
                | attn2d_core::Error::Shape { .. } => 2,
                _ => 1,
            },
        }
    }
}
