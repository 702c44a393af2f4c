use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at `{key}`: {message}")]
    Parse { key: String, message: String },

    #[error("truncated data: expected {expected} values, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("window does not intersect the raster extent")]
    EmptyWindow,

    #[error("coordinate reference mismatch: `{left}` vs `{right}`")]
    CrsMismatch { left: String, right: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("cannot compute statistics of an empty population")]
    EmptyPopulation,

    #[error("loss is undefined: no valid pixels")]
    UndefinedLoss,

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
