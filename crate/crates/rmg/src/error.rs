//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RmgError>;

#[derive(Error, Debug)]
pub enum RmgError {
    #[error("time {t} s is outside the gesture window")]
    OutOfWindow { t: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("gesture sequence is empty")]
    EmptySequence,

    #[error("expected 16 physical channels, got {got}")]
    ChannelCountError { got: usize },

    #[error("sampling rate {fs} Hz cannot represent a {hi} Hz passband edge")]
    NyquistError { fs: f64, hi: f64 },

    #[error("series {index} has zero variance")]
    DegenerateSeries { index: usize },

    #[error("annotation {index} overlaps a neighbour or exceeds the recording")]
    AnnotationOverlap { index: usize },

    #[error("analysis window of {win} samples exceeds series length {len}")]
    WindowTooLong { win: usize, len: usize },

    #[error("unknown wavelet `{0}`")]
    UnknownWavelet(String),

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("label {label} outside 0..23")]
    LabelError { label: usize },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    DivergenceError { epoch: usize },

    #[error("cross-validation over routines needs at least 2 routines")]
    NotEnoughRoutines,

    #[error("unknown subject {subject}")]
    SubjectError { subject: u32 },

    #[error("channel selector resolves to an empty channel set")]
    SelectorError,

    #[error("series is empty")]
    EmptySeries,

    #[error("no peak found in a flat window")]
    NoPeak,

    #[error("no events detected")]
    NoEvents,

    #[error("fold count k={k} is not a valid cross-validation plan")]
    InvalidFoldCount { k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dataset is corrupt: {detail}")]
    CorruptDataset { detail: String },

    #[error("{path}: expected {expected} bytes, found {got}")]
    SizeError {
        path: String,
        expected: u64,
        got: u64,
    },

    #[error("model container is corrupt: {detail}")]
    CorruptModel { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RmgError {
    /// Process exit code for the CLI: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use RmgError::*;
        match self {
            InvalidParam(_) | InvalidFoldCount { .. } | UnknownWavelet(_) | SelectorError => 1,
            NonFiniteInput | DivergenceError { .. } | DegenerateSeries { .. } | NoPeak
            | NoEvents => 3,
            _ => 2,
        }
    }
}
