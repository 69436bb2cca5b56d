use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("record {record_id}: value {value:?} is not in the domain of attribute {attribute:?}")]
    DomainViolation {
        record_id: String,
        attribute: String,
        value: String,
    },

    #[error("record {record_id} references unknown region {region_id:?}")]
    UnknownRegion {
        record_id: String,
        region_id: String,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    /// Errors caused by bad user input, as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Serialize(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
