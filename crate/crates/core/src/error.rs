use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors (or a tensor and a parameter) disagree on a dimension.
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("unexpected parameter `{0}`")]
    UnexpectedParameter(String),

    #[error("parameter `{path}` has shape {found:?}, expected {expected:?}")]
    ParameterShape {
        path: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error(transparent)]
    Image(#[from] ImageError),

    #[error(transparent)]
    WeightFile(#[from] WeightFileError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{0}: file not found")]
    NotFound(PathBuf),

    #[error("{path}: unsupported image format ({detail}); expected 8-bit RGB PNG")]
    Unsupported { path: PathBuf, detail: String },

    #[error("{path}: corrupt PNG: {detail}")]
    Corrupt { path: PathBuf, detail: String },
}

#[derive(Debug, Error)]
pub enum WeightFileError {
    #[error("bad magic {0:?}, expected \"CVHW\"")]
    BadMagic([u8; 4]),

    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),

    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("truncated weight file: {0}")]
    Truncated(String),

    #[error("malformed weight file: {0}")]
    Malformed(String),
}
