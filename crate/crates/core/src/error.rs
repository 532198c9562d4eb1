use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate projection: 1 - (x1 cos s + x2 sin s)/R = {denominator:e} is below the floor {floor:e}")]
    DegenerateProjection { denominator: f64, floor: f64 },

    #[error("point ({x1}, {x2}) lies outside the admissible cylinder of radius {radius}")]
    OutsideCylinder { x1: f64, x2: f64, radius: f64 },

    #[error("noise index out of grid: {0}")]
    IndexOutOfGrid(String),

    #[error("empty sample")]
    EmptySample,

    #[error("at least {needed} realizations are required, got {got}")]
    TooFewRealizations { needed: usize, got: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("quadrature did not converge: change {change:e} after refinement exceeds tolerance {tol:e}")]
    QuadratureNonConvergence { change: f64, tol: f64 },

    #[error("direction vector must be nonzero")]
    ZeroDirection,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Configuration problems are reported separately from numerical failures
    /// by the command line tool.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::OutsideCylinder { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
