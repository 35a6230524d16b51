use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("quadrature not converged: {0}")]
    QuadratureNotConverged(String),
    #[error("nesting infeasible: {0}")]
    NestingInfeasible(String),
    #[error("determinant outside [0,1]: {0}")]
    NonPositiveDeterminant(String),
    #[error("numeric assertion failed: {0}")]
    Assertion(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
