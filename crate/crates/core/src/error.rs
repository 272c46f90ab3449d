use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("missing channel: {0}")]
    MissingChannel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate binary task: {0}")]
    DegenerateBinaryTask(String),

    #[error("inner fold impossible: {0} training subjects (need at least 2)")]
    InnerFoldImpossible(usize),

    #[error("layer `{layer}`: {msg}")]
    Shape { layer: String, msg: String },

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("unknown class label `{0}`")]
    UnknownLabel(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }
}
