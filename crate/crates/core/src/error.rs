use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("non-finite value at voxel {0}")]
    NonFinite(usize),
    #[error("target spacing must be positive, got {0:?}")]
    DegenerateTarget([f64; 3]),
    #[error("mask has no positive voxels")]
    EmptyMask,
    #[error("intensity standard deviation {0:e} is below the normalization floor")]
    DegenerateIntensity(f64),
    #[error("bad geometry: {0}")]
    BadGeometry(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: axial {axial}, sagittal {sagittal}")]
    LengthMismatch { axial: usize, sagittal: usize },
    #[error("slice feature stack is empty")]
    EmptyStack,
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("data has zero total variance")]
    DegenerateData,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("optimization diverged: {0}")]
    Divergence(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
