use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or usage.
    Parameter,
    /// Unreadable, malformed, or insufficient input data.
    Data,
    /// A dense kernel failed to converge or produced an unusable result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("cannot decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("fewer than 2 frames (found {found})")]
    TooFewFrames { found: usize },

    #[error("mixed frame dimensions: expected {expected:?}, found {found:?} in {what}")]
    MixedDimensions {
        expected: (u32, u32),
        found: (u32, u32),
        what: String,
    },

    #[error("crop rectangle {rect} out of bounds for {width}x{height} frames")]
    CropOutOfBounds { rect: String, width: u32, height: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero signal: snapshot matrix is identically zero")]
    ZeroSignal,

    #[error("too few snapshots: delay d = {d} requires d <= K - 1, but K = {k}")]
    TooFewSnapshots { d: usize, k: usize },

    #[error("defective eigenvalue: mu = 0 has no continuous-time counterpart")]
    DefectiveEigenvalue,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("mode index {index} out of range ({len} modes)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("geometry mismatch: {nx}x{ny} = {expected} pixels, modes have {found} rows")]
    GeometryMismatch {
        nx: usize,
        ny: usize,
        expected: usize,
        found: usize,
    },

    #[error("degenerate synthetic spec: {0}")]
    DegenerateSpec(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sample leak: {artifact} from held-out sample {source_id} cannot enter the training pool")]
    Leak { source_id: String, artifact: String },

    #[error("mode image {artifact} names source {source_id}, which is not in the corpus")]
    UnknownSource { source_id: String, artifact: String },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::TooFewSnapshots { .. } | Error::IndexOutOfRange { .. } => {
                ErrorKind::Parameter
            }
            Error::NumericalFailure(_) | Error::DefectiveEigenvalue => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, err: serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
