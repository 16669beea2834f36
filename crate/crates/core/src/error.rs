use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DvdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel matrix is singular (rank-deficient population)")]
    RankDeficient,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty state buffer")]
    EmptyBuffer,

    #[error("bandit update for arm {got} but arm {expected:?} was chosen")]
    ArmMismatch { expected: Option<usize>, got: usize },

    #[error("rollout failed at step {step}: {reason}")]
    Rollout { step: usize, reason: String },

    #[error("perturbation {index}: {source}")]
    Sensing {
        index: usize,
        #[source]
        source: Box<DvdError>,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<DvdError>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for DvdError {
    fn from(e: std::io::Error) -> Self {
        DvdError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DvdError>;

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DvdError::NonFinite(what.to_string()))
    }
}
