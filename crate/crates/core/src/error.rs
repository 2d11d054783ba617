use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid material model: {0}")]
    InvalidMaterial(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("field size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("inadmissible configuration: {0}")]
    Inadmissible(String),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("step {step}, {substep} substep: {source}")]
    Substep { step: usize, substep: &'static str, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical solver (as opposed to bad input or I/O).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NoConvergence(_) | Error::Singular(_) => true,
            Error::Substep { .. } => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
