use thiserror::Error;

use crate::qp::{ConstraintRef, QpStatus};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("constraint row {row} has a nonzero intercept coefficient")]
    ConstrainedIntercept { row: usize },

    #[error("invalid quadratic program: {0}")]
    InvalidQp(String),

    #[error("constraints are infeasible (certificate: {certificate:?})")]
    Infeasible { certificate: ConstraintRef },

    #[error("quadratic program ended with status {status:?} after {iterations} iterations")]
    QpFailed { status: QpStatus, iterations: usize },

    #[error("robust fit failed at iteration {iteration}: {source}")]
    RobustIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("winsorized outcome variance is zero")]
    DegenerateVariance,

    #[error("unknown characteristic `{0}`")]
    UnknownCharacteristic(String),

    #[error("invalid spline spec: {0}")]
    InvalidSpline(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Infeasible { .. } | Error::QpFailed { .. } | Error::DegenerateVariance | Error::Numerical(_) => true,
            Error::RobustIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
