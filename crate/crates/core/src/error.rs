use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("sample size {n_total} is not divisible by {partitions} partitions")]
    Indivisible { n_total: usize, partitions: usize },

    #[error("eigendecomposition did not converge for a {0}x{0} matrix")]
    EigenConvergence(usize),

    #[error("coefficients diverged at iteration {iteration} (|alpha| = {magnitude:e})")]
    Divergence { iteration: usize, magnitude: f64 },

    #[error("model kernel does not match the problem's spectral kernel")]
    KernelMismatch,

    #[error("cannot average an empty set of models")]
    EmptyModels,

    #[error("unknown regime `{0}`")]
    InvalidRegime(String),

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
