use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or mismatched table shapes.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed observations or missing input files.
    #[error("data error: {0}")]
    Data(String),
    /// A numerical routine failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
