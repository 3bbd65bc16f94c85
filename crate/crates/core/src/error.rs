use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("invalid bounding box ({x1}, {y1}, {x2}, {y2}): width and height must be positive")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("bounding box refinement diverged: {0}")]
    RefinerDiverged(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("normal equations are singular; use a regularization weight lambda > 0")]
    Singular,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {needed} samples, got {actual}")]
    InsufficientSamples { needed: usize, actual: usize },

    #[error("triangulation is degenerate: {0}")]
    DegenerateTriangulation(String),

    #[error("pose synthesis rejected: {0}")]
    PoseRejected(String),

    #[error("manifest entry {index} ({path}): {message}")]
    ManifestEntry {
        index: usize,
        path: PathBuf,
        message: String,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("model file checksum mismatch (file is truncated or corrupted)")]
    Checksum,

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
