use thiserror::Error;

/// Errors raised by the numerical kernels and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("embedding error: {0}")]
    Embedding(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("degenerate variance: {0}")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures that come from the numbers rather than from the request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence(_)
                | Error::Accuracy(_)
                | Error::Degenerate(_)
                | Error::Embedding(_)
                | Error::Evaluation(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
