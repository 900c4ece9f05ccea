use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value produced at {layer}")]
    NonFinite { layer: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    /// A straggler asked for history the server no longer holds.
    #[error("unrecoverable staleness: client {client} needs round {round}, which is missing from history")]
    UnrecoverableStaleness { client: usize, round: u64 },

    #[error("round {round} aborted: client {client} produced a non-finite scalar at perturbation {perturbation}")]
    NonFiniteScalar {
        round: u64,
        client: usize,
        perturbation: usize,
    },

    #[error("client {0} holds no training samples")]
    EmptyShard(usize),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
