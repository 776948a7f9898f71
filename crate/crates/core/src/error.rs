use thiserror::Error;

/// Errors raised by the qpuk library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {n_phases} phases")]
    IndexOutOfRange { index: usize, n_phases: usize },

    #[error("Fock cutoff {cutoff} leaves truncated Poisson mass {mass:e} (limit {limit:e})")]
    Truncation {
        cutoff: usize,
        mass: f64,
        limit: f64,
    },

    #[error("phase count mismatch: ensemble has {ensemble}, response model has {model}")]
    PhaseCountMismatch { ensemble: usize, model: usize },

    #[error("malformed CRP table: {0}")]
    CrpFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
