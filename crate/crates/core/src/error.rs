use thiserror::Error;

/// Errors raised by the toolkit's numerical and configuration layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("search space of {size} candidate pairs exceeds the budget of {budget}")]
    BudgetExceeded { size: u128, budget: u128 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Scenario(Vec<String>),

    #[error("INR measurement failed after {measurements_used} measurements: {message}")]
    Measurement {
        message: String,
        measurements_used: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
