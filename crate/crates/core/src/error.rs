use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("frame {index} ({path}) is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    DimensionMismatch {
        index: usize,
        path: String,
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("sequence contains no frames")]
    EmptySequence,

    #[error("bad magic in {what}")]
    BadMagic { what: &'static str },

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    TruncatedFile {
        what: &'static str,
        expected: u64,
        found: u64,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("value out of range in {what}")]
    OutOfRange { what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("sigma is zero at step {t}; epsilon/v is undefined")]
    DivisionByZeroStep { t: usize },

    #[error("noise level {tau} outside [0, {max}]")]
    NoiseLevelOutOfRange { tau: usize, max: usize },

    #[error("missing flow: {0}")]
    MissingFlow(String),

    #[error("expected {expected} flow pairs, got {found}")]
    FlowCountMismatch { expected: usize, found: usize },

    #[error("every validity mask is empty; warping error is undefined")]
    AllMasksEmpty,

    #[error("{what} is {h}x{w}, needs at least {min}x{min}")]
    TooSmall {
        what: &'static str,
        h: usize,
        w: usize,
        min: usize,
    },

    #[error("row {row} outside frame height {height}")]
    RowOutOfRange { row: usize, height: usize },

    #[error("dimensions {h}x{w} not divisible by {factor}")]
    DimensionNotDivisible { h: usize, w: usize, factor: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error("I/O failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec failure on {}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingFile { .. } => "MissingFile",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptySequence => "EmptySequence",
            Error::BadMagic { .. } => "BadMagic",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::NonFinite { .. } => "NonFinite",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::DivisionByZeroStep { .. } => "DivisionByZeroStep",
            Error::NoiseLevelOutOfRange { .. } => "NoiseLevelOutOfRange",
            Error::MissingFlow(_) => "MissingFlow",
            Error::FlowCountMismatch { .. } => "FlowCountMismatch",
            Error::AllMasksEmpty => "AllMasksEmpty",
            Error::TooSmall { .. } => "TooSmall",
            Error::RowOutOfRange { .. } => "RowOutOfRange",
            Error::DimensionNotDivisible { .. } => "DimensionNotDivisible",
            Error::Usage(_) => "UsageError",
            Error::Io { .. } => "IoFailure",
            Error::Image { .. } => "ImageFailure",
            Error::Parse { .. } => "ParseFailure",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub(crate) fn ensure_same_shape(op: &'static str, left: &[usize], right: &[usize]) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        })
    }
}
