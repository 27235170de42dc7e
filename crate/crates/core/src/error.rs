use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("could not place {what} after {attempts} attempts; the arena is too crowded")]
    Placement { what: &'static str, attempts: usize },

    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("action {action} is out of range for {count} actions")]
    ActionIndex { action: usize, count: usize },

    #[error("non-finite {0} during update; aborting")]
    NonFinite(&'static str),

    #[error("output directory {0} already exists and is not empty")]
    OutputExists(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stl(#[from] stlmarl_stl::StlError),

    #[error(transparent)]
    Nn(#[from] stlmarl_nn::NnError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
