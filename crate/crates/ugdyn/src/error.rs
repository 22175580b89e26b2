//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("enumeration budget exceeded: {needed} assignments required, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: u64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stiffness failure at t = {t:.6}: step size collapsed below {min_step:.3e} (max log a_m = {max_log_a:.3})")]
    Stiffness {
        t: f64,
        min_step: f64,
        max_log_a: f64,
    },

    #[error("numerical overflow at t = {t:.6}: non-finite state encountered")]
    Overflow { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Stable kind tag for machine-parsable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Parse { .. } => "parse",
            Error::Stiffness { .. } => "stiffness",
            Error::Overflow { .. } => "overflow",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code for the CLI: 2 input error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Parse { .. } | Error::BudgetExceeded { .. } => 2,
            Error::Stiffness { .. } | Error::Overflow { .. } => 3,
            Error::Io(_) => 2,
        }
    }
}
