//! Crate-wide error type.

use crate::colorspace::Channel;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("image contains no pixels")]
    EmptyImage,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("intensity {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("transform grids differ: {left} vs {right} intervals")]
    GridMismatch { left: usize, right: usize },

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("{channel} outputs violate monotonicity at grid index {index}")]
    NonMonotone { channel: Channel, index: usize },

    #[error("{channel} endpoint not pinned: y[{index}] = {value}, expected {expected}")]
    UnpinnedEndpoint {
        channel: Channel,
        index: usize,
        value: f64,
        expected: f64,
    },

    #[error("{channel} output {value} at grid index {index} is outside [0, 1]")]
    OutputOutOfRange {
        channel: Channel,
        index: usize,
        value: f64,
    },

    #[error("malformed transform document: {0}")]
    MalformedDocument(String),

    #[error("unsupported transform document version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("no pairs matched")]
    NoPairs,

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("too many pair failures: {succeeded} of {listed} pairs usable")]
    TooManyPairFailures { succeeded: usize, listed: usize },

    #[error("failed to read {path}: {source}")]
    FileRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    FileWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
