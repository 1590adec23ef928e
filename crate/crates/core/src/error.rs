use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector lengths that must agree do not.
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// A value violates the documented precondition of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An opinion with zero uncertainty was passed where division by `u` is required.
    #[error("degenerate opinion: {0}")]
    DegenerateOpinion(String),

    /// A neighbor query asked for more class-mates than exist.
    #[error("class pool holds {available} other samples but {requested} neighbors were requested")]
    InsufficientNeighbors { requested: usize, available: usize },

    /// A class cannot be oversampled (fewer than two real samples).
    #[error("class {class} has {count} samples; at least 2 are needed to synthesize")]
    UnbalanceableClass { class: usize, count: usize },

    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or inconsistent dataset contents, with a file/row locator when known.
    #[error("data error: {0}")]
    Data(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}: non-finite loss or gradient (batch loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        });
    }
    Ok(())
}
