use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {operand}: expected {expected}, got {actual}")]
    Dimension {
        operand: &'static str,
        expected: String,
        actual: String,
    },

    #[error("{what} is not positive definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("{what} is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("{what} is singular")]
    Singular { what: &'static str },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("negative multiplier tau[{index}] = {value:e}")]
    NegativeMultiplier { index: usize, value: f64 },

    #[error("synthesis infeasible at the initial state ({detail})")]
    InitialInfeasible { detail: String },

    /// `log` holds the per-step log CSV up to the failing step.
    #[error("synthesis became infeasible at step {step}; recursive feasibility violated")]
    RecursiveFeasibility { step: usize, log: String },

    #[error("numerical failure in synthesis at step {step}: {detail}")]
    NumericalFailure { step: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_shape(operand: &'static str, expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            operand,
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", actual.0, actual.1),
        })
    }
}

pub(crate) fn check_len(operand: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            operand,
            expected: expected.to_string(),
            actual: actual.to_string(),
        })
    }
}
