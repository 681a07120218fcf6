use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reconstruction and rendering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("azimuth is undefined for a point on the cylinder axis")]
    UndefinedAzimuth,

    #[error("degenerate plane homography at layer {layer} (neighbor camera {neighbor})")]
    DegenerateHomography { layer: usize, neighbor: usize },

    #[error("incompatible MDPs: {0}")]
    IncompatibleMdp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("bad magic bytes, not an MDP container")]
    BadMagic,

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, stable across versions; used for exit and status codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    InvalidInput,
    Io,
    Calibration,
    /// Malformed, corrupt or incompatible data.
    Format,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidCalibration(_) => ErrorKind::Calibration,
            Error::UndefinedAzimuth | Error::DegenerateHomography { .. } => ErrorKind::Numeric,
            Error::InvalidArgument(_) => ErrorKind::InvalidInput,
            Error::Io { .. } => ErrorKind::Io,
            Error::IncompatibleMdp(_)
            | Error::DimensionMismatch(_)
            | Error::VersionMismatch { .. }
            | Error::Truncated { .. }
            | Error::ChecksumMismatch { .. }
            | Error::BadMagic
            | Error::Parse { .. }
            | Error::Image(_) => ErrorKind::Format,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
