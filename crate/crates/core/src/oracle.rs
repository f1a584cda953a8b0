//! Reference implementations for verification: a primal entropy maximizer on
//! a fixed grid, the closed-form mean-only solution, and textbook laws.
//!
//! Nothing here calls into [`crate::dual`]; agreement between the two is
//! evidence rather than tautology.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{moments_of, FiniteDistribution, MomentSequence, SupportWindow};

/// Constraint residual the primal oracle must reach (relative per order).
pub const ORACLE_RESIDUAL: f64 = 1e-8;

/// Stationarity residual the primal oracle must reach.
pub const ORACLE_STATIONARITY: f64 = 1e-8;

const MAX_NEWTON: usize = 500;

/// Textbook laws used as fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReferenceLaw {
    Poisson { rate: f64 },
    Binomial { trials: u64, p: f64 },
    /// `P(X = x) = p (1 − p)^x` on the non-negative integers.
    Geometric { p: f64 },
    /// Mass `weight` at `a`, `1 − weight` at `b`.
    TwoPoint { a: u64, b: u64, weight: f64 },
    /// Uniform on `{low..=high}`.
    Uniform { low: u64, high: u64 },
}

impl ReferenceLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ReferenceLaw::Poisson { rate } => rate > 0.0 && rate.is_finite(),
            ReferenceLaw::Binomial { p, .. } => (0.0..=1.0).contains(&p),
            ReferenceLaw::Geometric { p } => p > 0.0 && p <= 1.0,
            ReferenceLaw::TwoPoint { weight, .. } => (0.0..=1.0).contains(&weight),
            ReferenceLaw::Uniform { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid law parameters {self:?}")))
        }
    }

    /// Natural log of the probability mass at `x` (`-∞` off the support).
    pub fn ln_pmf(&self, x: u64) -> f64 {
        let xf = x as f64;
        match *self {
            ReferenceLaw::Poisson { rate } => -rate + xf * rate.ln() - ln_factorial(x),
            ReferenceLaw::Binomial { trials, p } => {
                if x > trials {
                    return f64::NEG_INFINITY;
                }
                let ln_choose = ln_factorial(trials) - ln_factorial(x) - ln_factorial(trials - x);
                ln_choose + xlogy(xf, p) + xlogy((trials - x) as f64, 1.0 - p)
            }
            ReferenceLaw::Geometric { p } => p.ln() + xlogy(xf, 1.0 - p),
            ReferenceLaw::TwoPoint { a, b, weight } => {
                let mass = if a == b {
                    if x == a { 1.0 } else { 0.0 }
                } else if x == a {
                    weight
                } else if x == b {
                    1.0 - weight
                } else {
                    0.0
                };
                mass.ln()
            }
            ReferenceLaw::Uniform { low, high } => {
                if (low..=high).contains(&x) {
                    -((high - low + 1) as f64).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn pmf(&self, x: u64) -> f64 {
        self.ln_pmf(x).exp()
    }

    /// The law restricted to `window` and renormalized.
    pub fn truncated(&self, window: SupportWindow) -> Result<FiniteDistribution> {
        self.validate()?;
        let ln: Vec<f64> = window.states().map(|x| self.ln_pmf(x)).collect();
        let max = ln.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::InvalidDistribution(format!(
                "{self:?} has no mass on {window}"
            )));
        }
        FiniteDistribution::normalized(window, ln.iter().map(|v| (v - max).exp()).collect())
    }
}

/// `x ln y` with `0 ln 0 = 0`.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Moments of `law` truncated to `window` and renormalized.
pub fn reference_moments(law: &ReferenceLaw, window: SupportWindow, order: usize) -> Result<MomentSequence> {
    Ok(moments_of(&law.truncated(window)?, order))
}

/// Maximum-entropy law on `window` with the given moments, by a primal method.
///
/// Newton's method on the KKT system of `max H(p)` subject to `A p = b`, where
/// row `k` of `A` holds `(x/s)^k` for a fixed scale `s`. The primal update is
/// applied multiplicatively, `p ← p·exp(t·Δp/p)`, which keeps every state
/// positive; `t` backtracks on the norm of the KKT residual.
pub fn grid_maxent(mu: &MomentSequence, window: SupportWindow) -> Result<FiniteDistribution> {
    let n = window.len();
    let rows = mu.order() + 1;
    let s = (window.right() as f64).max(1.0);
    let a = DMatrix::from_fn(rows, n, |k, j| ((window.left() + j as u64) as f64 / s).powi(k as i32));
    let b = DVector::from_fn(rows, |k, _| mu.get(k) / s.powi(k as i32));

    let mut p = DVector::from_element(n, 1.0 / n as f64);
    // Start on the stationarity manifold of the uniform law.
    let mut nu = DVector::zeros(rows);
    nu[0] = -(p[0].ln() + 1.0);

    let kkt = |p: &DVector<f64>, nu: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let dual = DVector::from_fn(n, |j, _| p[j].ln() + 1.0) + a.transpose() * nu;
        let primal = &a * p - &b;
        (dual, primal)
    };
    let norm = |(d, r): &(DVector<f64>, DVector<f64>)| (d.norm_squared() + r.norm_squared()).sqrt();

    let mut residual = kkt(&p, &nu);
    for iteration in 0..MAX_NEWTON {
        if converged(&p, &a, &b, s, &residual) {
            let max = p.max();
            return FiniteDistribution::normalized(window, p.iter().map(|v| v / max).collect());
        }
        let (dual, primal) = &residual;
        // Eliminate Δp = −P (dual + Aᵀ Δν), then (A P Aᵀ) Δν = primal − A P dual.
        let ap = DMatrix::from_fn(rows, n, |k, j| a[(k, j)] * p[j]);
        let schur = &ap * a.transpose();
        let rhs = primal - &ap * dual;
        let dnu = match schur.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => schur.lu().solve(&rhs).ok_or(Error::Singular)?,
        };
        let rel = -(dual + a.transpose() * &dnu);

        let mut t: f64 = (600.0 / rel.amax().max(1e-300)).min(1.0);
        let current = norm(&residual);
        let mut accepted = false;
        while t > 1e-14 {
            let p_next = DVector::from_fn(n, |j, _| p[j] * (t * rel[j]).exp());
            let nu_next = &nu + &dnu * t;
            let r_next = kkt(&p_next, &nu_next);
            if p_next.iter().all(|v| *v > 0.0) && norm(&r_next) <= (1.0 - 0.01 * t) * current {
                p = p_next;
                nu = nu_next;
                residual = r_next;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return stalled(window, &p, &a, &b, s, &residual, iteration);
        }
    }
    stalled(window, &p, &a, &b, s, &residual, MAX_NEWTON)
}

/// Constraint residual in unscaled moment units, relative to `max(|μ_k|, 1)`.
///
/// Row `k` of the scaled system is the unscaled one divided by `s^k`, so the
/// floor of one becomes `s^{-k}`.
fn constraint_residual(p: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, s: f64) -> f64 {
    let r = a * p - b;
    (0..b.len())
        .map(|k| r[k].abs() / b[k].abs().max(s.powi(-(k as i32))))
        .fold(0.0, f64::max)
}

fn converged(p: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, s: f64, residual: &(DVector<f64>, DVector<f64>)) -> bool {
    constraint_residual(p, a, b, s) <= ORACLE_RESIDUAL * 1e-2 && residual.0.amax() <= ORACLE_STATIONARITY * 1e-2
}

/// Outcome once no step reduces the KKT residual: a result that already
/// meets the oracle tolerances is returned, anything else is reported.
fn stalled(
    window: SupportWindow,
    p: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    s: f64,
    residual: &(DVector<f64>, DVector<f64>),
    iterations: usize,
) -> Result<FiniteDistribution> {
    let constraint = constraint_residual(p, a, b, s);
    let stationarity = residual.0.amax();
    if constraint > ORACLE_RESIDUAL {
        Err(Error::InfeasibleOnWindow { residual: constraint })
    } else if stationarity > ORACLE_STATIONARITY {
        Err(Error::OracleStalled { iterations, stationarity })
    } else {
        let max = p.max();
        FiniteDistribution::normalized(window, p.iter().map(|v| v / max).collect())
    }
}

/// Truncated geometric law `q(x) ∝ r^x` on `window` with mean `mu1`, with `r`
/// found by bisection.
pub fn analytic_m1(mu1: f64, window: SupportWindow) -> Result<FiniteDistribution> {
    let (l, r) = (window.left() as f64, window.right() as f64);
    if !(mu1 > l && mu1 < r) {
        return Err(Error::InfeasibleOnWindow {
            residual: (mu1 - mu1.clamp(l, r)).abs(),
        });
    }
    let law = |ratio: f64| {
        // Weights relative to the left edge, computed in the log domain.
        let ln_r = ratio.ln();
        let ln_w: Vec<f64> = window.states().map(|x| (x as f64 - l) * ln_r).collect();
        let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = ln_w.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect::<Vec<f64>>()
    };
    let mean = |probs: &[f64]| -> f64 {
        window.states().zip(probs).map(|(x, p)| x as f64 * p).sum()
    };

    let (mut lo, mut hi) = (1.0, 1.0);
    while mean(&law(lo)) > mu1 {
        lo *= 0.5;
    }
    while mean(&law(hi)) < mu1 {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mean(&law(mid)) < mu1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    FiniteDistribution::normalized(window, law(0.5 * (lo + hi)))
}
