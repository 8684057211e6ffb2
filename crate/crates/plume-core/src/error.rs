use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: png decode failed: {source}")]
    PngDecode {
        path: PathBuf,
        #[source]
        source: png::DecodingError,
    },

    #[error("{path}: png encode failed: {source}")]
    PngEncode {
        path: PathBuf,
        #[source]
        source: png::EncodingError,
    },

    #[error("{path}: unsupported png: {reason}")]
    UnsupportedPng { path: PathBuf, reason: String },

    #[error("dimension mismatch in {context}: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        context: &'static str,
        left_w: u32,
        left_h: u32,
        right_w: u32,
        right_h: u32,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("plume {w}x{h} at anchor ({x},{y}) exceeds background {bg_w}x{bg_h}")]
    OutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        bg_w: u32,
        bg_h: u32,
    },

    #[error("no feasible placement after {attempts} scale draws")]
    NoFeasiblePlacement { attempts: u32 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid annotation json: {0}")]
    AnnotationJson(#[from] serde_json::Error),

    #[error("annotation entry '{entry}': {reason}")]
    AnnotationEntry { entry: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(
        context: &'static str,
        left: (u32, u32),
        right: (u32, u32),
    ) -> Self {
        Error::DimensionMismatch {
            context,
            left_w: left.0,
            left_h: left.1,
            right_w: right.0,
            right_h: right.1,
        }
    }
}
