use thiserror::Error;

/// Crate-wide error type. The categories map one-to-one onto the CLI
/// exit codes: validation and parse errors exit 2, capacity errors 3,
/// non-convergence 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("config parse: {0}")]
    Parse(String),
    #[error("capacity: {0}")]
    Capacity(String),
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse(_) | Error::Io(_) => 2,
            Error::Capacity(_) => 3,
            Error::NonConvergence(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
