use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The instance lies outside the parameter region an operation is valid for.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no root of {what} found in [{lo}, {hi}]")]
    NoRoot { what: String, lo: f64, hi: f64 },

    #[error("resource cap exceeded: N = {n} > cap {cap}")]
    Resource { n: u64, cap: u64 },

    /// Amplitudes within one symmetry class differ; signals a simulator bug.
    #[error("symmetry violation in {class}: spread {spread:e}")]
    SymmetryViolation { class: String, spread: f64 },

    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Regime(_) | Error::Domain(_) => 2,
            Error::Resource { .. } => 3,
            Error::NoRoot { .. } | Error::SymmetryViolation { .. } | Error::Assertion(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Regime(_) => "regime",
            Error::Domain(_) => "domain",
            Error::NoRoot { .. } => "no_root",
            Error::Resource { .. } => "resource",
            Error::SymmetryViolation { .. } => "symmetry_violation",
            Error::Assertion(_) => "assertion",
        }
    }
}
