use thiserror::Error;

/// Crate-wide error type.
///
/// `Data` covers malformed or inconsistent input (bad tables, impossible
/// surveys, unknown labels); `Config` covers invalid settings (dimensions,
/// prior parameters, experiment configs). The CLI maps `Data` to exit code 1
/// and `Config` to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
