use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{method} did not converge: {detail}")]
    NoConvergence { method: &'static str, detail: String },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("reduced system left its validity regime: minimum gap {gap:.4} below threshold {threshold:.4} at t = {t}")]
    OutsideValidity { gap: f64, threshold: f64, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
