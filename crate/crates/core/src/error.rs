use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid design configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An iterative numeric method did not reach its tolerance.
    #[error("numeric error: {message} (best estimate {estimate:e}, achieved error {achieved:e})")]
    Numeric {
        message: String,
        estimate: f64,
        achieved: f64,
    },

    /// The root-finding bracket does not contain a sign change.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// A spline fit could not be formed on the given grid.
    #[error("fit error: {0}")]
    Fit(String),

    /// Broken internal invariant; indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Config(_))
    }
}

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}
