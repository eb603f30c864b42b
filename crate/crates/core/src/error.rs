use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid too coarse at node ({i}, {j}): {reason}")]
    GridTooCoarse { i: usize, j: usize, reason: String },

    #[error("boundary projection from ghost node ({i}, {j}) did not converge (|phi| = {residual:e})")]
    ProjectionFailed { i: usize, j: usize, residual: f64 },

    #[error("stencil at node ({i}, {j}) touches a node outside the active set")]
    StencilOutsideActive { i: usize, j: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear solve failed for order {order}, dt = {dt:e}: residual {residual:e} after {iterations} iterations")]
    SolveFailed {
        order: u8,
        dt: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("quadrature did not reach tolerance {tolerance:e} (estimate {estimate:e})")]
    QuadratureTolerance { tolerance: f64, estimate: f64 },

    #[error("reference norm is zero")]
    ZeroReference,

    #[error("detector point ({x}, {y}) is not inside the fluid")]
    DetectorOutsideFluid { x: f64, y: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
