use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cannot parse kernel spec `{input}`: {reason}")]
    KernelParse { input: String, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("kernel Gram matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, max eigenvalue {max_eigenvalue:e}, jitter tried {jitter:e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
        jitter: f64,
    },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("check failed: {0}")]
    Violation(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
