use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not a graph Laplacian: {0}")]
    NotLaplacian(String),

    #[error("eigenvalue iteration did not converge after {0} steps")]
    NoConvergence(usize),

    #[error("invalid graph at {field}: {message}")]
    InvalidGraph { field: String, message: String },

    #[error("invalid input layout at {field}: {message}")]
    InvalidLayout { field: String, message: String },

    #[error("{m} exogenous inputs exceed the {n} agents of the network")]
    TooManyInputs { m: usize, n: usize },

    #[error("communication graph is not connected")]
    GraphNotConnected,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid protocol parameter {field}: {message}")]
    InvalidParams { field: String, message: String },

    #[error("numerical blowup at t = {t}: state magnitude exceeded {limit:e} (step size too large?)")]
    NumericalBlowup { t: f64, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at {field}: {message}")]
    Validation { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit status for the CLI: 2 validation, 3 numerical, 4 i/o.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) => 4,
            Error::NumericalBlowup { .. } | Error::NoConvergence(_) => 3,
            _ => 2,
        }
    }
}
