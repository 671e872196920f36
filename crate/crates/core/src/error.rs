use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("kernel evaluated at coincident points (R = 0)")]
    SingularEvaluation,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("problem too large for dense evaluation: N = {n} exceeds {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("accuracy error: {0}")]
    Accuracy(String),
}

pub type Result<T> = core::result::Result<T, Error>;
