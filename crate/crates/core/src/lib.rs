//! Maximum-entropy reconstruction of one-dimensional discrete distributions
//! with unbounded support from a finite sequence of raw moments.
//!
//! The entropy maximization is solved through its convex dual with a
//! Levenberg-Marquardt iteration on a finite window of states. The window
//! starts from the nodes of the Gauss rule of the moment sequence (roots of
//! bordered Hankel determinants) and grows until the probability at its right
//! edge is negligible relative to the mode.
//!
//! ```
//! use maxent_recon::{reconstruct, validate_moments, SolverConfig, SupportConfig};
//!
//! let mu = validate_moments(&[1.0, 1.0]).unwrap();
//! let res = reconstruct(&mu, &SupportConfig::default(), &SolverConfig::default()).unwrap();
//! // Mean one on the non-negative integers: geometric law with ratio 1/2.
//! assert!((res.distribution.prob(0) - 0.5).abs() < 1e-6);
//! ```

pub mod cli;
pub mod dual;
pub mod error;
pub mod io;
pub mod moments;
pub mod numerics;
pub mod oracle;
pub mod reconstruct;
pub mod support;

pub use dual::{
    distribution_from, evaluate_dual, gradient, hessian, lm_step, minimize, minimize_from, power_sums,
    LagrangeMultipliers, SolverConfig, SolverReport,
};
pub use error::{Error, Result};
pub use moments::{
    entropy, moments_of, total_variation, validate_moments, FiniteDistribution, MomentSequence, SupportWindow,
};
pub use reconstruct::{reconstruct, ReconstructionResult};
pub use support::{
    chebyshev_window, delta0_polynomial, delta1_polynomial, extend_block, extend_one, initial_window, tail_ok,
    Strategy, SupportConfig,
};
