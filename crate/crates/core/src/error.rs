use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("congested-phase evaluation at singular density rho = {rho:e}")]
    SingularDensity { rho: f64 },

    #[error("{quantity} is undefined at {value}")]
    OutOfDomain { quantity: &'static str, value: f64 },

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("density {rho} lies outside [0, rho_max] and cannot be repaired by projection")]
    InadmissibleDensity { rho: f64 },

    #[error("cell {cell}: {source}")]
    Cell { cell: usize, source: Box<Error> },

    #[error("interface {interface}: {source}")]
    Interface { interface: usize, source: Box<Error> },

    #[error("boundary evaluation failed at t = {t}: {source}")]
    Boundary { t: f64, source: Box<Error> },

    #[error("minmod of an empty list")]
    EmptyMinmod,

    #[error("non-finite state in cell {cell} at t = {t}")]
    NonFinite { cell: usize, t: f64 },

    #[error("cell {cell} left the admissible set at t = {t}")]
    Inadmissible { cell: usize, t: f64 },

    #[error("step limit of {steps} reached at t = {t}")]
    StepLimit { steps: usize, t: f64 },

    #[error("{field}: {constraint}")]
    Validation { field: String, constraint: String },

    #[error("diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by the command-line driver for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Usage(_) => ErrorKind::Usage,
            Error::Validation { .. } | Error::Parse(_) | Error::InvalidParams(_) => {
                ErrorKind::Validation
            }
            Error::Io(_) => ErrorKind::Io,
            Error::Cell { source, .. }
            | Error::Interface { source, .. }
            | Error::Boundary { source, .. } => match source.kind() {
                ErrorKind::Validation => ErrorKind::Validation,
                _ => ErrorKind::Numerical,
            },
            _ => ErrorKind::Numerical,
        }
    }
}
