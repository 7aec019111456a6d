use thiserror::Error;

/// Errors raised by the vehicle model, the filter, and the campaign runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid control bounds: {0}")]
    InvalidBounds(String),

    #[error("invalid vehicle spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The fully slacked QP could not be solved. Every row carries a slack in
    /// that problem, so reaching this means the solver itself broke down.
    #[error("safety QP infeasible after slack escalation ({0})")]
    Infeasible(String),

    #[error("active-set solver did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("singular KKT system while solving the safety QP")]
    Singular,

    #[error("encounter grid contains no counts")]
    EmptyGrid,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
