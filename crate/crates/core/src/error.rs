use thiserror::Error;

pub type Result<T> = std::result::Result<T, VexError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VexError {
    #[error("exponent is not elliptic: value {value} <= 1")]
    NonElliptic { value: f64 },

    #[error("exponent {value} is not below the dimension N = {dim}; Sobolev conjugate is unbounded")]
    ExponentTooLarge { value: f64, dim: usize },

    #[error("mesh generation failed: {0}")]
    MeshFailure(String),

    #[error("cell {cell} is degenerate (zero volume)")]
    DegenerateCell { cell: usize },

    #[error("integrand is not finite at x = {x:?}")]
    NonFiniteIntegrand { x: Vec<f64> },

    #[error("no bisection bracket found: {0}")]
    BracketFailure(String),

    #[error("solver stopped after {iterations} iterations with residual {residual:e}")]
    MaxItersExceeded { iterations: usize, residual: f64 },

    #[error("iterate collapsed to zero (gradient norm {norm:e})")]
    CollapseToZero { norm: f64 },

    #[error("scaling root for the Nehari projection not found: {0}")]
    NoScalingRoot(String),

    #[error("domain is not star-shaped for any tested origin (best min x.nu = {best:e})")]
    NotStarShaped { best: f64 },

    #[error("insufficient runs for remainder: {0}")]
    InsufficientRuns(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for VexError {
    fn from(e: std::io::Error) -> Self {
        VexError::Io(e.to_string())
    }
}
