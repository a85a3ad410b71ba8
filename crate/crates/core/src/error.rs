use thiserror::Error;

/// Errors raised by model validation, the exact oracle and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("term {term} is not stoquastic: entry ({row}, {col}) = {value:e} > 0")]
    NotStoquastic {
        term: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("{what} supports at most {max} qubits/spins, got {got}")]
    TooLarge {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("{name} = {value} is outside {expected}")]
    Range {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("guiding state is orthogonal to the ground state")]
    OrthogonalGuide,

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("estimator diagnostic failure at rung {rung}: {reason}")]
    Diagnostic { rung: usize, reason: String },
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of a statistical diagnostic rather than of the input.
    pub fn is_statistical(&self) -> bool {
        matches!(self, Error::Diagnostic { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
