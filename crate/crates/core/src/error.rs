use thiserror::Error;

pub type Result<T> = std::result::Result<T, AfError>;

#[derive(Debug, Error)]
pub enum AfError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("numerical failure after {} iterations: {message}", trace.len())]
    NumericalFailure { message: String, trace: Vec<f64> },

    #[error("resource error: {0}")]
    Resource(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
