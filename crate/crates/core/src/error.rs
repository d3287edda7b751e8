use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Input violates a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// Two values built over different towers were combined.
    #[error("elements belong to different towers")]
    TowerMismatch,
    #[error("division by zero")]
    DivisionByZero,
    /// The tower has no global complex conjugation (not CM and not totally real).
    #[error("tower has no global conjugation: {0}")]
    NotCm(String),
    /// A certified predicate could not be decided within the precision cap.
    #[error("precision exhausted: {0}")]
    Precision(String),
    /// A search or enumeration budget was exhausted before completion.
    #[error("budget exhausted: {0}")]
    Budget(String),
    /// The requested size exceeds a hard capacity limit of this build.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// The question is outside the regimes this build can decide.
    #[error("undecidable in this build: {0}")]
    Undecidable(String),
    #[error("parse error: {0}")]
    Parse(String),
    /// A dual computation disagreed; this is a bug, never a user error.
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::TowerMismatch => "tower_mismatch",
            Error::DivisionByZero => "division_by_zero",
            Error::NotCm(_) => "not_cm",
            Error::Precision(_) => "precision_exhausted",
            Error::Budget(_) => "budget_exhausted",
            Error::Capacity(_) => "capacity_exceeded",
            Error::Undecidable(_) => "undecidable",
            Error::Parse(_) => "parse",
            Error::Internal(_) => "internal",
        }
    }
}
