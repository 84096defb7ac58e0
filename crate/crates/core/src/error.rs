use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto the failure modes of
/// the pipeline stages: image I/O, dataset pairing, filter parameters, model
/// files, and metric preconditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image encoding for {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unpaired dataset file: {0}")]
    Pairing(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("coordinate ({x}, {y}) out of bounds for {width}x{height}")]
    Bounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("csv schema mismatch: {0}")]
    Schema(String),

    #[error("unsupported model format version {0}")]
    Version(u32),

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("ROC needs both classes present in the labels")]
    SingleClass,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
