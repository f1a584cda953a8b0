use thiserror::Error;

use crate::reconstruct::ReconstructionResult;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("moment sequence is empty")]
    EmptyMoments,

    #[error("μ₀ must equal 1 (got {0})")]
    Unnormalized(f64),

    #[error("moment μ{order} is negative or not finite ({value})")]
    InvalidMoment { order: usize, value: f64 },

    #[error("μ₂ < μ₁² (μ₁ = {mu1}, μ₂ = {mu2})")]
    NegativeVariance { mu1: f64, mu2: f64 },

    #[error("at least {needed} moments beyond μ₀ are required, got {got}")]
    TooFewMoments { needed: usize, got: usize },

    #[error("invalid support window {{{left}..{right}}}")]
    InvalidWindow { left: i64, right: i64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("overflow: exponent not representable even after shifting")]
    Overflow,

    #[error("singular or ill-conditioned linear system")]
    Singular,

    #[error("non-positive diagonal entry {index} in damped system")]
    NonPositiveDiagonal { index: usize },

    #[error("degenerate polynomial: all coefficients vanish")]
    DegeneratePolynomial,

    #[error("insufficient real roots: found {found} of {degree}")]
    InsufficientRealRoots { found: usize, degree: usize },

    #[error("diverged: damping exceeded {gamma:e} without an acceptable step")]
    Diverged { gamma: f64 },

    #[error("infeasible on window: no distribution matches the moments (residual {residual:e})")]
    InfeasibleOnWindow { residual: f64 },

    #[error("oracle stalled after {iterations} iterations (stationarity {stationarity:e})")]
    OracleStalled { iterations: usize, stationarity: f64 },

    #[error("window cap reached at {} states", .0.window.len())]
    WindowCapReached(Box<ReconstructionResult>),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
