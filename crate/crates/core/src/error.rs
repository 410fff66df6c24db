use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset too small: need n >= {need}, have n = {have}")]
    DatasetTooSmall { need: usize, have: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("lookup-table projector cannot project unseen data")]
    LookupTransformUnsupported,

    #[error("bad magic bytes in model file")]
    BadMagic,

    #[error("unsupported model file version {0}")]
    BadVersion(u32),

    #[error("model file truncated or malformed: {0}")]
    Truncated(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
