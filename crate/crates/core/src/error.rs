use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("blow-up at t = {t}: sup norm {norm:.3e}")]
    BlowUp { t: f64, norm: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error("config error for key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
