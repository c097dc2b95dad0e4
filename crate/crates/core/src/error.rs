use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped by class (see [`Error::class`]) so front ends can map
/// them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("stream out of order at index {index}: t_ms {t_ms} follows {previous_ms}")]
    StreamOrder { index: usize, t_ms: u64, previous_ms: u64 },
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("length check failed: expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("magic check failed: got {0:02x?}")]
    Magic([u8; 4]),
    #[error("version check failed: unsupported version {0}")]
    Version(u8),
    #[error("crc check failed: computed {computed:#010x}, packet carries {carried:#010x}")]
    Integrity { computed: u32, carried: u32 },
    #[error("transport error: {0}")]
    Transport(#[source] io::Error),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("calibration error: {0}")]
    Calibration(&'static str),
    #[error("insufficient data: {got} samples in window, need at least {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("degenerate training set: {0}")]
    DegenerateTraining(&'static str),
    #[error("shape mismatch: model expects {expected} features, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("undefined measure: {0}")]
    UndefinedMeasure(&'static str),
    #[error("evaluation error: {0}")]
    Evaluation(&'static str),
}

/// Coarse error classes, one per exit code family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Argument,
    Config,
    Protocol,
    Io,
    Format,
    Analysis,
    Model,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidArgument(_) | DegenerateInput(_) | StreamOrder { .. } => ErrorClass::Argument,
            Config { .. } => ErrorClass::Config,
            Length { .. } | Magic(_) | Version(_) | Integrity { .. } => ErrorClass::Protocol,
            Transport(_) | Io(_) => ErrorClass::Io,
            Parse { .. } => ErrorClass::Format,
            Calibration(_) | InsufficientData { .. } | Annotation(_) | UndefinedMeasure(_) => ErrorClass::Analysis,
            DegenerateTraining(_) | Shape { .. } | Evaluation(_) => ErrorClass::Model,
        }
    }
}
