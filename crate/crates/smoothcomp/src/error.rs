use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shapes do not compose for the requested operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced or received a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The Jacobi SVD did not reach the off-diagonal tolerance.
    #[error("svd did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch} (last good epoch: {last_good:?})")]
    Diverged {
        epoch: usize,
        last_good: Option<usize>,
    },

    /// Configuration file failed schema validation.
    #[error("config: {0}")]
    Config(String),

    /// A data file could not be decoded.
    #[error("data format error in {path}: {message} (byte offset {offset})")]
    DataFormat {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    /// A model file (manifest or sidecar) is malformed.
    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
