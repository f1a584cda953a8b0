//! Moment sequences, support windows and explicit finite distributions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a [`FiniteDistribution`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Validated raw moments `μ₀..μ_M` of a non-negative integer random variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSequence {
    values: Vec<f64>,
}

impl MomentSequence {
    /// Highest moment order `M`.
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Moment of order `k`. Panics if `k > M`.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn mean(&self) -> Option<f64> {
        self.values.get(1).copied()
    }

    /// Keeps only the moments up to order `order`.
    pub fn truncated(&self, order: usize) -> MomentSequence {
        MomentSequence {
            values: self.values[..=order.min(self.order())].to_vec(),
        }
    }

    /// Whether the Hankel matrix `[μ_{i+j}]` is positive semidefinite.
    ///
    /// This is a necessary realizability condition for moments of a
    /// distribution. It is reported, never enforced: moments coming from
    /// approximate upstream computations may violate it marginally.
    pub fn hankel_psd(&self, tol: f64) -> bool {
        let n = self.order() / 2 + 1;
        let hankel = DMatrix::from_fn(n, n, |i, j| self.values[i + j]);
        let scale: Vec<f64> = (0..n).map(|i| hankel[(i, i)].abs().sqrt().max(f64::MIN_POSITIVE)).collect();
        let scaled = DMatrix::from_fn(n, n, |i, j| hankel[(i, j)] / (scale[i] * scale[j]));
        SymmetricEigen::new(scaled)
            .eigenvalues
            .iter()
            .all(|&e| e >= -tol)
    }
}

/// Validates raw moments read from an external source.
///
/// Only the normalization `μ₀ = 1`, non-negativity and `μ₂ ≥ μ₁²` are
/// enforced. See [`MomentSequence::hankel_psd`] for a stricter diagnostic.
pub fn validate_moments(raw: &[f64]) -> Result<MomentSequence> {
    let Some(&mu0) = raw.first() else {
        return Err(Error::EmptyMoments);
    };
    if mu0 != 1.0 {
        return Err(Error::Unnormalized(mu0));
    }
    for (order, &value) in raw.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidMoment { order, value });
        }
    }
    if raw.len() > 2 && raw[2] < raw[1] * raw[1] {
        return Err(Error::NegativeVariance {
            mu1: raw[1],
            mu2: raw[2],
        });
    }
    Ok(MomentSequence {
        values: raw.to_vec(),
    })
}

impl TryFrom<Vec<f64>> for MomentSequence {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        validate_moments(&raw)
    }
}

/// Contiguous integer window `{left..=right}` on which sums are truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportWindow {
    left: u64,
    right: u64,
}

impl SupportWindow {
    pub fn new(left: u64, right: u64) -> Result<Self> {
        if left > right {
            return Err(Error::InvalidWindow {
                left: left as i64,
                right: right as i64,
            });
        }
        Ok(SupportWindow { left, right })
    }

    pub fn singleton(x: u64) -> Self {
        SupportWindow { left: x, right: x }
    }

    pub fn left(&self) -> u64 {
        self.left
    }

    pub fn right(&self) -> u64 {
        self.right
    }

    /// Number of states in the window.
    pub fn len(&self) -> usize {
        (self.right - self.left + 1) as usize
    }

    /// Always false; a window holds at least one state.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: u64) -> bool {
        self.left <= x && x <= self.right
    }

    pub fn states(&self) -> impl Iterator<Item = u64> + Clone {
        self.left..=self.right
    }
}

impl std::fmt::Display for SupportWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}..{}}}", self.left, self.right)
    }
}

/// Explicit probability table over a [`SupportWindow`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDistribution {
    window: SupportWindow,
    probs: Vec<f64>,
}

impl FiniteDistribution {
    /// Builds a distribution, requiring the mass to be one within [`MASS_TOLERANCE`].
    pub fn new(window: SupportWindow, probs: Vec<f64>) -> Result<Self> {
        Self::check_shape(&window, &probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(FiniteDistribution { window, probs })
    }

    /// Builds a distribution from non-negative weights by dividing by their sum.
    pub fn normalized(window: SupportWindow, weights: Vec<f64>) -> Result<Self> {
        Self::check_shape(&window, &weights)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(FiniteDistribution { window, probs })
    }

    pub fn uniform(window: SupportWindow) -> Self {
        let n = window.len();
        FiniteDistribution {
            window,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(x: u64) -> Self {
        FiniteDistribution {
            window: SupportWindow::singleton(x),
            probs: vec![1.0],
        }
    }

    fn check_shape(window: &SupportWindow, probs: &[f64]) -> Result<()> {
        if probs.len() != window.len() {
            return Err(Error::DimensionMismatch {
                expected: window.len(),
                got: probs.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "negative or non-finite probability {p}"
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> SupportWindow {
        self.window
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of state `x`; zero outside the window.
    pub fn prob(&self, x: u64) -> f64 {
        if self.window.contains(x) {
            self.probs[(x - self.window.left) as usize]
        } else {
            0.0
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.window.states().zip(self.probs.iter().copied())
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

/// Raw moments `μ_k = Σ_x x^k p(x)` for `k = 0..=order`.
pub fn moments_of(dist: &FiniteDistribution, order: usize) -> MomentSequence {
    let mut values = vec![0.0; order + 1];
    for (x, p) in dist.iter() {
        let x = x as f64;
        let mut power = p;
        for v in values.iter_mut() {
            *v += power;
            power *= x;
        }
    }
    // The table sums to one within MASS_TOLERANCE; pin μ₀ exactly.
    values[0] = 1.0;
    MomentSequence { values }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(dist: &FiniteDistribution) -> f64 {
    -dist
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Total-variation distance, half the L1 distance over the union of both windows.
pub fn total_variation(a: &FiniteDistribution, b: &FiniteDistribution) -> f64 {
    let left = a.window.left.min(b.window.left);
    let right = a.window.right.max(b.window.right);
    0.5 * (left..=right)
        .map(|x| (a.prob(x) - b.prob(x)).abs())
        .sum::<f64>()
}
