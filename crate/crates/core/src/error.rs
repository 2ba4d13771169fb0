use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The bound parameters make a denominator of the error-bound chain non-positive.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("invalid call: {0}")]
    InvalidCall(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("simulation diverged at t = {time} s: {detail}")]
    Divergence { time: f64, detail: String },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
