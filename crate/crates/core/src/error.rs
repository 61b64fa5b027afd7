use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("every key is masked for query row {row}")]
    AllKeysMasked { row: usize },

    #[error("sample has no valid observations")]
    NoObservations,

    #[error("no valid targets")]
    NoTargets,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("checkpoint schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint {what} is {found}, configuration expects {expected}")]
    ConfigMismatch {
        what: String,
        found: usize,
        expected: usize,
    },

    #[error("coordinate ({lat}, {lon}) lies outside the grid")]
    OutsideGrid { lat: f64, lon: f64 },

    #[error("missing field: {0}")]
    MissingField(String),

    #[error("cannot split: {0}")]
    Split(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by malformed or missing input data, as
    /// opposed to numerical problems.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Corrupt { .. }
                | Error::VersionMismatch { .. }
                | Error::ConfigMismatch { .. }
                | Error::OutsideGrid { .. }
                | Error::MissingField(_)
                | Error::Split(_)
                | Error::Io { .. }
                | Error::NoObservations
                | Error::NoTargets
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Diverged { .. })
    }
}
