use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = StixError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum StixError {
    #[error("keyword id {id} is outside the vocabulary (size {vocabulary_size})")]
    KeywordOutOfRange { id: u32, vocabulary_size: usize },

    #[error("bitmap length mismatch: {left} vs {right}")]
    BitmapLength { left: usize, right: usize },

    #[error("rank {rank} does not fit in {bits} bits per axis")]
    RankOverflow { rank: u64, bits: u32 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("duplicate object id {0}")]
    DuplicateId(u64),

    #[error("model training diverged: {0}")]
    TrainingDiverged(String),

    #[error("{variant} does not support {operation}")]
    Unsupported {
        variant: &'static str,
        operation: &'static str,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
