use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no empty bins: log p̂_0 is undefined")]
    NoEmptyBins,

    #[error("empirical characteristic function vanishes on the grid at θ index {index} of {grid}")]
    SingularEcf { index: usize, grid: usize },

    #[error("phase unwrapping failed: grid refinement cap {cap} exceeded")]
    UnwrapFailure { cap: usize },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    RootFinding { iterations: usize, residual: f64 },

    #[error("degenerate polynomial: {0}")]
    DegeneratePolynomial(String),

    #[error("winding correction failed: {0}")]
    CorrectionFailure(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
