use thiserror::Error;

/// Errors raised by the index, field, trajectory and I/O layers.
#[derive(Debug, Error)]
pub enum AdfError {
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite input at position {0}")]
    NonFiniteInput(usize),
    #[error("index is empty")]
    EmptyIndex,
    #[error("trajectory {flight_id} too short: need at least {needed} samples, got {got}")]
    TooShort {
        flight_id: String,
        needed: usize,
        got: usize,
    },
    #[error("trajectory {flight_id}: timestamps not strictly increasing at sample {index}")]
    NonMonotoneTime { flight_id: String, index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("negative score {score} at point {index}")]
    NegativeScore { index: usize, score: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input contains no usable records")]
    EmptyInput,
    #[error("bad snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AdfError {
    /// True when a write failed because the reader went away.
    pub fn is_broken_pipe(&self) -> bool {
        let io = match self {
            AdfError::Io(e) => Some(e),
            AdfError::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e),
                _ => None,
            },
            _ => None,
        };
        io.is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
    }
}

pub type Result<T> = std::result::Result<T, AdfError>;
