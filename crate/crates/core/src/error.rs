use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model or configuration input violates its constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the domain on which the quantity is defined.
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A one-sided quantity was requested at a point where it jumps.
    #[error("{what} is double-valued at {at}; a side must be given")]
    AmbiguousSide { what: &'static str, at: f64 },

    /// A bracketing root search could not find a sign change.
    #[error("root not bracketed for {what}: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// An iterative solve did not converge.
    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The penalised free-boundary shooting failed.
    #[error("shooting failed: {0}")]
    Shooting(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidParameter(msg.into())
    }
}
