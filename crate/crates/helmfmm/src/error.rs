use std::io;

/// Errors of the IO and command layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("mesh contains no usable elements")]
    EmptyMesh,
    #[error("format error: {0}")]
    Format(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] helmfmm_core::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
