use thiserror::Error;

/// Errors produced by the simulation, processing and allocation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsacError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("cyclic prefix constraint violated: {0}")]
    CyclicPrefix(String),

    #[error("unknown constellation `{0}`")]
    UnknownConstellation(String),

    #[error("sampling rate {fs} Hz is below the required {required} Hz")]
    Undersampled { fs: f64, required: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("beam-sweeping frame: range-Doppler processing needs a constant TX beam")]
    BeamSweeping,

    #[error("singular bound: {0}")]
    Singular(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("insufficient pilots: {0}")]
    InsufficientPilots(String),

    #[error("operation requires monostatic sensing")]
    RequiresMonostatic,

    #[error("SNR too low: {0}")]
    LowSnr(String),

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl IsacError {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        IsacError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        IsacError::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

impl From<std::io::Error> for IsacError {
    fn from(e: std::io::Error) -> Self {
        IsacError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, IsacError>;
