use thiserror::Error;

/// Errors surfaced by the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {index} has zero norm")]
    ZeroNormColumn { index: usize },

    #[error("model columns are rank deficient")]
    RankDeficient,

    #[error("model interpolates the response (RSS = 0); fiducial mass is undefined")]
    Degenerate,

    #[error("invalid model index set: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("chain initialization failed: {0}")]
    InitializationFailed(String),

    #[error("problem too large for exhaustive enumeration: {0}")]
    EnumerationGuard(String),
}

pub type Result<T> = std::result::Result<T, Error>;
