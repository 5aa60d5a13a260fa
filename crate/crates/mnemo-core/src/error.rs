//! Crate-wide error type.

use crate::temporal::TimeRange;

/// Errors produced by the memory engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("entity {0:?} is empty after normalization")]
    DegenerateEntity(String),

    #[error("unknown node {0:?}")]
    UnknownNode(String),

    #[error("no score for node {0:?}; node scores must cover all edge endpoints")]
    MissingNodeScore(String),

    #[error("missing finer-scale captions for scale {scale_ms} ms: gaps {gaps:?}")]
    DependencyGap { scale_ms: u64, gaps: Vec<TimeRange> },

    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate feature vector (zero norm)")]
    DegenerateFeature,

    #[error("parse failure: {message}; raw output: {raw:?}")]
    Parse { message: String, raw: String },

    #[error("validation failure: {0}")]
    Validation(String),

    #[error("backend {backend:?}: {message}")]
    Backend {
        backend: String,
        message: String,
        retryable: bool,
    },

    #[error("backend {backend:?} lacks capability: {capability}")]
    Capability { backend: String, capability: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingest failed for segment {segment_id:?}: {source}")]
    Ingest {
        segment_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("snapshot format version {found} unsupported (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("snapshot digest mismatch: {0}")]
    DigestMismatch(String),

    #[error("io error at {path:?}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(message: impl Into<String>, raw: impl Into<String>) -> Self {
        Error::Parse {
            message: message.into(),
            raw: raw.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Transport-level backend errors may be retried; everything else is final.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::Backend {
                retryable: true,
                ..
            }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
