use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing path: {0}")]
    MissingPath(PathBuf),
    #[error("clip has no frames: {0}")]
    EmptyClip(String),
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        index: usize,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("malformed {kind} data in {origin}: {detail}")]
    Format {
        kind: &'static str,
        origin: String,
        detail: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("insufficient samples for channel {channel}: {detail}")]
    InsufficientSamples { channel: String, detail: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("missing channel {0}")]
    MissingChannel(String),
    #[error("temporal extension already applied")]
    TedAlreadyApplied,
    #[error("internal error: {0}")]
    Internal(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, origin: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            kind,
            origin: origin.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by the experiment configuration rather than the data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
