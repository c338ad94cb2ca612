use std::path::PathBuf;

use thiserror::Error;

use crate::model::Stage;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("stage order: expected corpus at {expected:?}, found {found:?}")]
    StageOrder { expected: Stage, found: Stage },
    #[error("duplicate app_id {0:?} in app table")]
    DuplicateApp(String),
    #[error("prompt: {0}")]
    Prompt(String),
    #[error("topic extraction failed for {category} ({shots}-shot): {reason}")]
    Extraction {
        category: String,
        shots: u8,
        reason: String,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error("topic {0:?} missing from class map")]
    UnknownTopic(String),
    #[error(transparent)]
    Stats(#[from] sara_stats::StatsError),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CoreError {
    let path = path.into();
    move |source| CoreError::Io { path, source }
}
