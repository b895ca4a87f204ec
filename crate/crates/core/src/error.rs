use thiserror::Error;

/// Errors raised by the set autoencoder library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("capacity exceeded: {needed} keys requested but n_max is {n_max}")]
    Capacity { needed: usize, n_max: usize },

    #[error("key {0} is not occupied in this latent")]
    KeyNotOccupied(usize),

    #[error("quantity is undefined: {0}")]
    Undefined(&'static str),

    #[error("world generation failed after {0} attempts")]
    Generation(usize),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Failures while reading or writing a parameter checkpoint.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad checkpoint header (expected magic \"PISA\")")]
    Header,

    #[error("unsupported checkpoint version {found} (this build reads {expected})")]
    Version { found: u8, expected: u8 },

    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checkpoint is malformed: {0}")]
    Malformed(String),

    #[error("checkpoint does not match the model: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err(op: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        op,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
