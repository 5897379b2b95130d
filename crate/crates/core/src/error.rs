use thiserror::Error;

pub type Result<T> = std::result::Result<T, CzicError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzicError {
    /// An argument lies outside the domain of the formula it feeds.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bound was requested outside the interference range where it is established.
    #[error("regime precondition failed: requires |a| {relation} {threshold:.4}")]
    Regime { relation: &'static str, threshold: f64 },

    #[error("correlation triple ({rho1}, {rho2}, {rho12}) does not give a positive semidefinite covariance")]
    InvalidCorrelation { rho1: f64, rho2: f64, rho12: f64 },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("numerically degenerate covariance: {0}")]
    Degenerate(String),

    #[error("codebook too large: {0}")]
    CodebookCap(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CzicError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CzicError::Domain(msg.into())
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        CzicError::Malformed(msg.into())
    }

    pub(crate) fn at_least(threshold: f64) -> Self {
        CzicError::Regime {
            relation: ">=",
            threshold,
        }
    }

    pub(crate) fn at_most(threshold: f64) -> Self {
        CzicError::Regime {
            relation: "<=",
            threshold,
        }
    }
}

impl From<std::io::Error> for CzicError {
    fn from(e: std::io::Error) -> Self {
        CzicError::Io(e.to_string())
    }
}
