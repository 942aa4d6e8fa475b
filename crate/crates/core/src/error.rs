use std::path::PathBuf;

use thiserror::Error;

use crate::types::QueryId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid segment [{start}, {end}]: {reason}")]
    InvalidSegment {
        start: f64,
        end: f64,
        reason: &'static str,
    },

    #[error("segment {index}: {source}")]
    AtSegment {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("segment {index} [{start}, {end}] exceeds duration {duration}")]
    SegmentExceedsDuration {
        index: usize,
        start: f64,
        end: f64,
        duration: f64,
    },

    #[error("segment {index} duplicates its predecessor")]
    DuplicateSegment { index: usize },

    #[error("ground truth has no segments")]
    EmptySegments,

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("vector `{0}` has zero norm")]
    ZeroNormVector(&'static str),

    #[error("embedding row {0} has zero norm")]
    ZeroNormRow(usize),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("clip index {index} out of range for {clips} clips")]
    ClipOutOfRange { index: usize, clips: usize },

    #[error("need at least 2 clips, got {0}")]
    TooFewClips(usize),

    #[error("no positive pairs")]
    NoPositivePairs,

    #[error("no negative clips")]
    NoNegativeClips,

    #[error("non-finite function value at probe coordinate {coordinate}")]
    NonFiniteProbe { coordinate: usize },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("prediction references unknown query {0}")]
    UnknownQuery(QueryId),

    #[error("duplicate qid {0}")]
    DuplicateQuery(QueryId),

    #[error("qid {qid}: {source}")]
    Record {
        qid: QueryId,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_segment(self, index: usize) -> Self {
        Error::AtSegment {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
