use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPerm(String),
    #[error("permutation is reducible")]
    Reducible,
    #[error("permutation is not of rotation type")]
    NotRotationType,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nonpositive entry at index {0}")]
    NonPositive(usize),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("not renormalizable: tie at step {step}")]
    NotRenormalizable { step: u64 },
    #[error("tie undecidable at working precision (gap {gap:e})")]
    TieUndecidable { gap: f64 },
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("image lengths do not tile the interval (defect {0:e})")]
    TilingViolation(f64),
    #[error("resource guard tripped: {0}")]
    ResourceGuard(String),
    #[error("max time {0} exceeded before all points returned")]
    MaxTimeExceeded(u64),
    #[error("cone not contracted: column spread {spread:e} > {tol:e}")]
    ConeNotContracted { spread: f64, tol: f64 },
    #[error("apparent rational rotation number: {0}")]
    RationalRotation(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for errors that mean a configured size or time limit was hit
    /// rather than a property of the input.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            Error::ResourceGuard(_) | Error::MaxTimeExceeded(_) | Error::PrecisionExhausted(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
