use std::path::PathBuf;

use qpnn::QpnnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: QpnnError,
    },
    #[error("I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("CSV output {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("statistics: {0}")]
    Stats(String),
}

impl From<QpnnError> for LabError {
    fn from(source: QpnnError) -> Self {
        LabError::Core {
            context: "simulation".into(),
            source,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
    let path = path.into();
    move |source| LabError::Io { path, source }
}
