use thiserror::Error;

/// Errors raised by the model, solvers and studies.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid input parameters (bad cell, non-unit direction, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ellipticity violated: {0}")]
    Ellipticity(String),

    #[error("flow field rejected: {0}")]
    Flow(String),

    #[error("nonlinearity rejected: {0}")]
    Nonlinearity(String),

    /// Eigen solve failed to reach tolerance.
    #[error("eigensolver did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("zero state not linearly unstable (mu0(n,0) = {0:e})")]
    NotLinearlyUnstable(f64),

    #[error("bracket expansion failed: {0}")]
    Bracket(String),

    #[error("time step {dt:e} exceeds stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("NaN detected at step {0}")]
    NaN(usize),

    #[error("range guard tripped at step {step}: u = {value} outside [{lo}, {hi}]")]
    Range {
        step: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no level crossing: {0}")]
    NoCrossing(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Resolution(_)
                | Error::NotLinearlyUnstable(_)
                | Error::Bracket(_)
                | Error::Cfl { .. }
                | Error::NaN(_)
                | Error::Range { .. }
                | Error::NoCrossing(_)
                | Error::InsufficientData(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
