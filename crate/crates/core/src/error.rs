//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Result`]. Variants are
//! grouped by failure class rather than by module so callers can match on
//! what went wrong (bad configuration, shape disagreement, malformed file)
//! without caring where it happened.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented range or relationship
    /// (e.g. zero batch size, extent smaller than the largest primitive).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Two rasters or tensors that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A raster or tensor was constructed with inconsistent dimensions or
    /// non-finite samples.
    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    /// A numeric quantity that must stay finite did not (diverged training
    /// loss, NaN written to an image file).
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A file exists but its contents do not match the expected format.
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// A file declares a format variant this crate deliberately does not
    /// read (e.g. big-endian PFM).
    #[error("{path}: unsupported variant: {reason}")]
    UnsupportedVariant { path: PathBuf, reason: String },

    /// Stored model dimensions disagree with what the caller requires.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// An underlying I/O operation failed; `context` names the file or
    /// directory involved.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an `io::Error` with the path or action that triggered it.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
