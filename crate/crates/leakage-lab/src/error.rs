use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("training aborted at iteration {iteration}: {message}")]
    Training { iteration: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn constraint(msg: impl Into<String>) -> Self {
        Error::Constraint(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
