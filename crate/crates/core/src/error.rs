use thiserror::Error;

/// Errors raised while loading inputs, propagating bounds or running the search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pop from an empty queue")]
    EmptyQueue,
    #[error("branch has no free feature to split")]
    NoFreeFeature,
    #[error("branch category violated: {0}")]
    Category(String),
    #[error("too many features for enumeration: {features} > {max}")]
    TooManyFeatures { features: usize, max: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
