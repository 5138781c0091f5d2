use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension n = {0} not supported: n >= 3 required")]
    Dimension(usize),
    #[error("point lies on the kernel singularity")]
    Singular,
    #[error("point |x| = {norm} too close to the origin for step h = {step} (|x| > 4h required)")]
    TooCloseToOrigin { norm: f64, step: f64 },
    #[error("zero frequency has no Stokes symbol")]
    ZeroFrequency,
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("memory budget exceeded: plan needs {required} bytes, budget is {budget} bytes")]
    MemoryBudget { required: usize, budget: usize },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("quadrature did not converge: estimated error {achieved:e} > tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
