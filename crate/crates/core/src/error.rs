use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::game::GameError;
use crate::llm::ProviderError;

/// Crate-wide error. Variants line up with the CLI's exit-code classes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("run interrupted")]
    Interrupted,
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Error {
        Error::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
