use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The camera matrix is too close to rank deficient to orthonormalize.
    #[error("degenerate camera: smallest singular value {sigma_min:.3e} <= {threshold:.3e}")]
    DegenerateCamera { sigma_min: f64, threshold: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Process exit code for the command-line front end.
    ///
    /// 1 = usage, 2 = data / schema, 3 = numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Parse { .. } | Error::Schema(_) | Error::Io(_) | Error::Shape(_) => 2,
            Error::Contract(_) | Error::Refused(_) => 2,
            Error::NonFinite(_) | Error::Numeric(_) | Error::DegenerateCamera { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
