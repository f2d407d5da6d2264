use thiserror::Error;

use crate::groundstate::FlowTrace;

/// Errors raised by the solvers and file formats of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("shooting bracket not found: {0}")]
    Bracket(String),

    #[error("gradient flow diverged ({0}); retry with a smaller step")]
    StepSize(String),

    #[error("no convergence after {iterations} iterations: {reason}")]
    Convergence {
        iterations: usize,
        reason: String,
        trace: Option<Box<FlowTrace>>,
    },

    #[error("outside the existence regime: {0}")]
    Domain(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn not_converged(iterations: usize, reason: impl Into<String>) -> Self {
        Error::Convergence {
            iterations,
            reason: reason.into(),
            trace: None,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
