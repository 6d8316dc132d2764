//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or geometric precondition was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Rasterized layout boundaries do not partition the panorama.
    #[error("layout topology error: {0}")]
    LayoutTopology(String),

    /// Every confidence weight over an element mask is zero.
    #[error("confidence degenerate: all weights over the element mask are zero")]
    ConfidenceDegenerate,

    /// Paired rasters or vectors disagree in shape.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    /// A manifest or scene spec referenced something invalid.
    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn manifest(msg: impl Into<String>) -> Self {
        Error::Manifest(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
