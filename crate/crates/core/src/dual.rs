//! Dual function of the moment-constrained entropy maximization and its
//! Levenberg-Marquardt minimization on a fixed support window.
//!
//! For multipliers `λ = (λ₁..λ_M)` the candidate law on a window `D` is
//! `q(x) = exp(-Σ λ_k x^k) / Z`, and the dual is `Ψ(λ) = ln Z + Σ λ_k μ_k`.
//! Its gradient is `μ_i - E_q[x^i]` and its Hessian the covariance of
//! `(x, x², …, x^M)` under `q`. Every sum is taken in the log domain with a
//! single shift shared by all orders, so ratios such as `μ̃_i / Z` never
//! overflow.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{FiniteDistribution, MomentSequence, SupportWindow};
use crate::numerics::{dot2, solve_damped, solve_damped_with};

/// Damping level at which the solver gives up on finding a descent step.
pub const GAMMA_LIMIT: f64 = 1e12;

const GAMMA_FLOOR: f64 = 1e-15;

/// Dual variables: `λ₁..λ_M`, plus `ln Z` on the window and `λ₀ = ln Z − 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangeMultipliers {
    lambda: Vec<f64>,
    lambda0: f64,
    log_z: f64,
}

impl LagrangeMultipliers {
    /// Multipliers with `ln Z` evaluated on `window`.
    pub fn on_window(lambda: Vec<f64>, window: SupportWindow) -> Result<Self> {
        let log_z = scaled_power_sums(&lambda, window, 0)?.log_z();
        Ok(LagrangeMultipliers {
            lambda,
            lambda0: log_z - 1.0,
            log_z,
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stopping threshold on the max-norm of an accepted step.
    pub delta_lambda: f64,
    /// Initial damping factor.
    pub gamma0: f64,
    /// Factor applied to the damping after a rejected step.
    pub gamma_raise: f64,
    /// Divisor applied to the damping after an accepted step.
    pub gamma_lower: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta_lambda: 1e-8,
            gamma0: 1e-3,
            gamma_raise: 2.0,
            gamma_lower: 3.0,
            max_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.delta_lambda) {
            return Err(Error::InvalidConfig("delta_lambda must be positive".into()));
        }
        if !positive(self.gamma0) {
            return Err(Error::InvalidConfig("gamma0 must be positive".into()));
        }
        if !(self.gamma_raise > 1.0) || !(self.gamma_lower > 1.0) {
            return Err(Error::InvalidConfig(
                "gamma_raise and gamma_lower must exceed 1".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the gradient at the returned multipliers.
    pub final_gradient_norm: f64,
    /// Ψ at the starting point followed by Ψ after each accepted step.
    pub dual_trace: Vec<f64>,
    /// Change of Ψ for each accepted step, evaluated without cancellation
    /// so it stays meaningful below the resolution of `dual_trace`.
    pub dual_decrease: Vec<f64>,
}

/// Power sums `Σ_{x∈D} x^i exp(-Σ λ_k x^k)` scaled by `exp(-shift)`.
#[derive(Debug, Clone)]
pub struct PowerSums {
    shift: f64,
    scaled: Vec<f64>,
}

impl PowerSums {
    /// `ln Z` on the window.
    pub fn log_z(&self) -> f64 {
        self.shift + self.scaled[0].ln()
    }

    /// `μ̃_i / Z`.
    pub fn normalized(&self, i: usize) -> f64 {
        self.scaled[i] / self.scaled[0]
    }

    /// Unscaled power sums; fails if any of them is not representable.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.scaled
            .iter()
            .map(|&s| {
                let v = s * self.shift.exp();
                if s > 0.0 && (self.shift + s.ln() > f64::MAX.ln() || !v.is_finite()) {
                    Err(Error::Overflow)
                } else {
                    Ok(v)
                }
            })
            .collect()
    }
}

/// Exponent `-Σ λ_k x^k`.
#[inline]
fn exponent(lambda: &[f64], x: f64) -> f64 {
    -lambda.iter().rev().fold(0.0, |acc, l| (acc + l) * x)
}

fn exponents(lambda: &[f64], window: SupportWindow) -> Result<(Vec<f64>, f64)> {
    let e: Vec<f64> = window.states().map(|x| exponent(lambda, x as f64)).collect();
    let shift = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if e.iter().any(|v| v.is_nan() || *v == f64::INFINITY) || !shift.is_finite() {
        return Err(Error::Overflow);
    }
    Ok((e, shift))
}

/// Shifted power sums up to `max_order`, keeping the shift explicit.
pub fn scaled_power_sums(lambda: &[f64], window: SupportWindow, max_order: usize) -> Result<PowerSums> {
    let (e, shift) = exponents(lambda, window)?;
    let mut scaled = vec![0.0; max_order + 1];
    for (x, ex) in window.states().zip(e) {
        let mut term = (ex - shift).exp();
        let x = x as f64;
        for s in scaled.iter_mut() {
            *s += term;
            term *= x;
        }
    }
    Ok(PowerSums { shift, scaled })
}

/// `μ̃_i = Σ_{x∈D} x^i exp(-Σ λ_k x^k)` for `i = 0..=max_order`; `μ̃₀ = Z`.
pub fn power_sums(lambda: &[f64], window: SupportWindow, max_order: usize) -> Result<Vec<f64>> {
    scaled_power_sums(lambda, window, max_order)?.values()
}

/// Everything the solver needs at one point, from a single pass.
struct Evaluation {
    psi: f64,
    weights: Vec<f64>,
    log_z: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

fn check_dims(lambda: &[f64], mu: &MomentSequence) -> Result<()> {
    if lambda.len() != mu.order() {
        return Err(Error::DimensionMismatch {
            expected: mu.order(),
            got: lambda.len(),
        });
    }
    Ok(())
}

/// Normalized weights of the exponential-family law on the window, and `ln Z`.
fn weights(lambda: &[f64], window: SupportWindow) -> Result<(Vec<f64>, f64)> {
    let (e, shift) = exponents(lambda, window)?;
    let mut w: Vec<f64> = e.iter().map(|v| (v - shift).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok((w, shift + total.ln()))
}

/// Mean of `x^i` (i = 1..=m) and their covariance under the weights.
fn moment_stats(w: &[f64], window: SupportWindow, m: usize) -> (Vec<f64>, DMatrix<f64>) {
    let powers = |x: f64| {
        let mut p = Vec::with_capacity(m);
        let mut v = 1.0;
        for _ in 0..m {
            v *= x;
            p.push(v);
        }
        p
    };
    let mut mean = vec![0.0; m];
    for (x, &p) in window.states().zip(w) {
        for (acc, v) in mean.iter_mut().zip(powers(x as f64)) {
            *acc += p * v;
        }
    }
    let mut cov = DMatrix::zeros(m, m);
    for (x, &p) in window.states().zip(w) {
        if p == 0.0 {
            continue;
        }
        let dev: Vec<f64> = powers(x as f64)
            .iter()
            .zip(&mean)
            .map(|(v, mean)| v - mean)
            .collect();
        for i in 0..m {
            for j in i..m {
                cov[(i, j)] += p * dev[i] * dev[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    (mean, cov)
}

fn evaluate(lambda: &[f64], window: SupportWindow, mu: &MomentSequence) -> Result<Evaluation> {
    let m = lambda.len();
    let (w, log_z) = weights(lambda, window)?;
    let (mean, hessian) = moment_stats(&w, window, m);
    let psi = log_z + (1..=m).map(|k| lambda[k - 1] * mu.get(k)).sum::<f64>();
    if !psi.is_finite() {
        return Err(Error::Overflow);
    }
    let gradient = DVector::from_fn(m, |i, _| mu.get(i + 1) - mean[i]);
    Ok(Evaluation {
        psi,
        weights: w,
        log_z,
        gradient,
        hessian,
    })
}

/// Dual function `Ψ(λ) = ln Z + Σ λ_k μ_k` with `Z` truncated to `window`.
pub fn evaluate_dual(lambda: &[f64], window: SupportWindow, mu: &MomentSequence) -> Result<f64> {
    check_dims(lambda, mu)?;
    let sums = scaled_power_sums(lambda, window, 0)?;
    let linear: f64 = lambda.iter().enumerate().map(|(k, l)| l * mu.get(k + 1)).sum();
    Ok(sums.log_z() + linear)
}

/// `∂Ψ/∂λ_i = μ_i − μ̃_i / Z` for `i = 1..=M`.
pub fn gradient(lambda: &[f64], window: SupportWindow, mu: &MomentSequence) -> Result<DVector<f64>> {
    check_dims(lambda, mu)?;
    let sums = scaled_power_sums(lambda, window, lambda.len())?;
    Ok(DVector::from_fn(lambda.len(), |i, _| {
        mu.get(i + 1) - sums.normalized(i + 1)
    }))
}

/// `∂²Ψ/∂λ_i∂λ_j = (Z μ̃_{i+j} − μ̃_i μ̃_j) / Z²`, evaluated as the
/// covariance of `x^i` and `x^j` under the current law on `window`.
pub fn hessian(lambda: &[f64], window: SupportWindow) -> Result<DMatrix<f64>> {
    let (w, _) = weights(lambda, window)?;
    Ok(moment_stats(&w, window, lambda.len()).1)
}

/// One damped Newton update `λ − (H + γ·diag(H))⁻¹ g`.
pub fn lm_step(lambda: &[f64], g: &DVector<f64>, h: &DMatrix<f64>, gamma: f64) -> Result<DVector<f64>> {
    let step = solve_damped(h, gamma, g)?;
    Ok(DVector::from_fn(lambda.len(), |i, _| lambda[i] - step[i]))
}

/// Minimizes the dual on `window` starting from `λ = 0`.
pub fn minimize(
    mu: &MomentSequence,
    window: SupportWindow,
    cfg: &SolverConfig,
) -> Result<(LagrangeMultipliers, SolverReport)> {
    minimize_from(mu, window, cfg, &vec![0.0; mu.order()])
}

/// Minimizes the dual on `window` starting from `init`.
///
/// A trial step is accepted only if it strictly lowers `Ψ`; the damping is
/// then divided by `gamma_lower`, otherwise multiplied by `gamma_raise` and
/// the step retried. Iteration stops once an accepted step has max-norm below
/// `delta_lambda`, or when a rejected step is already that small (no further
/// decrease is representable).
pub fn minimize_from(
    mu: &MomentSequence,
    window: SupportWindow,
    cfg: &SolverConfig,
    init: &[f64],
) -> Result<(LagrangeMultipliers, SolverReport)> {
    cfg.validate()?;
    check_dims(init, mu)?;
    let m = mu.order();

    let mut lambda = init.to_vec();
    let mut current = evaluate(&lambda, window, mu)?;
    let mut trace = vec![current.psi];
    let mut decrease = Vec::new();
    let mut gamma = cfg.gamma0;
    let mut iterations = 0;
    let mut converged = m == 0;

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let damping = damping_diagonal(&current.hessian);
        loop {
            if gamma > GAMMA_LIMIT {
                return Err(Error::Diverged { gamma });
            }
            let step = match solve_damped_with(&current.hessian, gamma, &damping, &current.gradient) {
                Ok(step) => step,
                Err(Error::Singular) => {
                    gamma *= cfg.gamma_raise;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let step_norm = step.amax();
            let candidate: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, s)| l - s).collect();
            let next = evaluate(&candidate, window, mu);
            let change = match &next {
                Ok(n) => small_step_change(&current.weights, window, &step, mu).unwrap_or(n.psi - current.psi),
                Err(_) => f64::NAN,
            };
            match next {
                Ok(next) if change < 0.0 => {
                    lambda = candidate;
                    current = next;
                    trace.push(current.psi);
                    decrease.push(change);
                    gamma = (gamma / cfg.gamma_lower).max(GAMMA_FLOOR);
                    converged = step_norm < cfg.delta_lambda;
                    break;
                }
                Ok(_) | Err(Error::Overflow) => {
                    if step_norm < cfg.delta_lambda {
                        converged = true;
                        break;
                    }
                    gamma *= cfg.gamma_raise;
                }
                Err(e) => return Err(e),
            }
        }
    }

    let report = SolverReport {
        converged,
        iterations,
        final_gradient_norm: current.gradient.amax(),
        dual_trace: trace,
        dual_decrease: decrease,
    };
    let multipliers = LagrangeMultipliers {
        lambda,
        lambda0: current.log_z - 1.0,
        log_z: current.log_z,
    };
    Ok((multipliers, report))
}

/// `Ψ(λ − s) − Ψ(λ)` for a small step `s`, as `ln E_q[exp(Σ s_k x^k)] − Σ s_k μ_k`.
/// Falls back to `None` when the step is too large for the expansion to help.
fn small_step_change(w: &[f64], window: SupportWindow, step: &DVector<f64>, mu: &MomentSequence) -> Option<f64> {
    let s: Vec<f64> = step.iter().copied().collect();
    let t: Vec<f64> = window.states().map(|x| -exponent(&s, x as f64)).collect();
    if t.iter().any(|v| !(v.abs() <= 1e-3)) {
        return None;
    }
    let shifted = dot2(w.iter().copied(), t.iter().map(|v| v.exp_m1()));
    let linear = dot2(step.iter().copied(), (1..=step.len()).map(|k| mu.get(k)));
    Some(shifted.ln_1p() - linear)
}

/// Diagonal used for damping: `diag(H)` with vanishing entries floored so the
/// damped system stays definite when the law degenerates.
fn damping_diagonal(h: &DMatrix<f64>) -> Vec<f64> {
    let max = h.diagonal().iter().copied().fold(0.0, f64::max);
    let floor = if max > 0.0 { max * 1e-12 } else { 1.0 };
    h.diagonal().iter().map(|&d| d.max(floor)).collect()
}

/// `q̃(x) = exp(−1 − λ₀ − Σ λ_k x^k)` on `window`, renormalized.
pub fn distribution_from(lm: &LagrangeMultipliers, window: SupportWindow) -> Result<FiniteDistribution> {
    let (e, shift) = exponents(&lm.lambda, window)?;
    FiniteDistribution::normalized(window, e.iter().map(|v| (v - shift).exp()).collect())
}
