use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("resource limit exceeded: required dimension {required} exceeds budget {budget}")]
    ResourceLimit { required: usize, budget: usize },

    #[error("cutoff {cutoff} too small: {reason}")]
    CutoffTooSmall { cutoff: usize, reason: String },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("expectation value is not real: {re} + {im}i")]
    NonReal { re: f64, im: f64 },

    #[error("state is not centered: |<a>| = {0:.3e}")]
    NotCentered(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
