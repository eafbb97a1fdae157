use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwlpError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("profile contract violated: {0}")]
    ProfileContract(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("scale range mismatch: {0}")]
    ScaleRange(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("image format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TwlpError>;

impl From<std::io::Error> for TwlpError {
    fn from(e: std::io::Error) -> Self {
        TwlpError::Io(e.to_string())
    }
}
