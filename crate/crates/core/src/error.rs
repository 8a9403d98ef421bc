use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    Bracketing {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("{indicator} has no sign change on [{lo}, {hi}]")]
    NoSignChange { indicator: String, lo: f64, hi: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A required input relation (e.g. a boundary law solving the system) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An internal consistency check failed. This indicates a bug or a
    /// counterexample to a property the model is expected to satisfy.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("fixed-point iteration did not converge after {iterations} steps (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
