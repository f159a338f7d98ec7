use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no well-formed tweets in {path} ({skipped} malformed lines)")]
    EmptyBatch { path: String, skipped: usize },
    #[error("overlapping spans {0} and {1}")]
    OverlappingSpans(String, String),
    #[error("invalid span: {0}")]
    InvalidSpan(String),
    #[error("empty vocabulary (min_df = {min_df})")]
    EmptyVocabulary { min_df: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite feature value at example {0}")]
    NonFinite(usize),
    #[error("feature index {index} out of range for {size} weights")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sink failed after {delivered} tweets: {message}")]
    Sink { delivered: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
