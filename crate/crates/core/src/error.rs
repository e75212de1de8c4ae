use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("unsupported resampling ratio {target_hz} / {source_hz} (denominator must be <= {max_denominator})")]
    UnsupportedRatio {
        source_hz: f64,
        target_hz: f64,
        max_denominator: u64,
    },

    #[error("signal of {available_s:.3} s is shorter than one {frame_s:.3} s frame")]
    TooShort { available_s: f64, frame_s: f64 },

    #[error("cutoff {cutoff_hz} Hz must lie strictly between 0 and the Nyquist frequency {nyquist_hz} Hz")]
    InvalidCutoff { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("no audio samples in {0}")]
    EmptyAudio(PathBuf),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("time column is not strictly increasing at line {line}")]
    NonMonotoneTime { line: usize },

    #[error("insufficient events: need at least {needed}, got {got}")]
    InsufficientEvents { needed: usize, got: usize },

    #[error("signal of {len} samples is too short for {levels} decomposition levels (needs {needed})")]
    DecompositionDepth {
        len: usize,
        levels: usize,
        needed: usize,
    },

    #[error("invalid scale grid: {0}")]
    InvalidGrid(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("insufficient peaks: need at least {needed}, found {found}")]
    InsufficientPeaks { needed: usize, found: usize },

    #[error("insufficient cycles: {0}")]
    InsufficientCycles(String),

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("design matrix is rank deficient: numerical rank {rank} of {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("no valid frames")]
    NoValidFrames,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined normalizer: reference energy is zero")]
    UndefinedNormalizer,

    #[error("degenerate coverage: {0}")]
    DegenerateCoverage(String),

    #[error("undefined correlation: zero variance")]
    UndefinedCorrelation,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("inconsistent synthesis spec: {0}")]
    InconsistentSpec(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Stage tag when the error came out of a pipeline run.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Innermost error, with any stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
