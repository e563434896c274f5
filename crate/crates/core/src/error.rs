use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FusionError>;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    Format(String),

    #[error("pixel value out of range: {0}")]
    Range(String),

    #[error("color space error: expected {expected}, got {actual}")]
    Space {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("training diverged at step {step}: total loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("unrecognized checkpoint format: {0}")]
    Version(String),

    #[error("checkpoint fingerprint {found:#018x} does not match expected {expected:#018x}")]
    Fingerprint { expected: u64, found: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl FusionError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FusionError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        FusionError::Shape(msg.into())
    }
}
