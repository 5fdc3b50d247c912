use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("order {order} not supported: {reason}")]
    UnsupportedOrder { order: usize, reason: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("quadrature did not converge: estimate {estimate}, error bound {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("singular matrix: {what} (condition number {condition:.3e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("infeasible constraint system: {0}")]
    Infeasible(String),

    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
