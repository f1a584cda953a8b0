//! Support-window estimation: initial windows from the roots of bordered
//! Hankel determinants, the tail-probability test and window extension.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{FiniteDistribution, MomentSequence, SupportWindow};
use crate::numerics::{determinant, real_simple_roots, PolyCoeffs, ROOT_TOL};

/// Relative size below which a determinant-polynomial coefficient is noise.
const DEGENERATE_TOL: f64 = 1e-10;

/// Distance to an integer below which floor/ceil snap to that integer.
const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One state per outer iteration, alternating left and right.
    Incremental,
    /// Fixed blocks sized from the Chebyshev window.
    Chebyshev,
}

/// How the Chebyshev half-width `z` is derived from the moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChebyshevBound {
    /// `z = μ₂ / ξ`.
    Raw,
    /// `z = sqrt(σ² / ξ)`, the textbook Chebyshev inequality.
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportConfig {
    /// Tail threshold: stop once `q(x_R) < delta_prob · max q`.
    pub delta_prob: f64,
    /// Chebyshev level `ξ`.
    pub xi: f64,
    pub strategy: Strategy,
    /// Maximum number of states in a window.
    pub max_window: usize,
    /// Also require the left edge to pass the tail test (unless it is 0).
    pub both_ends: bool,
    /// Even steps of the incremental extension keep the left edge in place.
    pub literal_even_step: bool,
    pub chebyshev_bound: ChebyshevBound,
}

impl Default for SupportConfig {
    fn default() -> Self {
        SupportConfig {
            delta_prob: 1e-3,
            xi: 0.1,
            strategy: Strategy::Incremental,
            max_window: 100_000,
            both_ends: false,
            literal_even_step: false,
            chebyshev_bound: ChebyshevBound::Raw,
        }
    }
}

impl SupportConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_prob > 0.0 && self.delta_prob < 1.0) {
            return Err(Error::InvalidConfig("delta_prob must lie in (0, 1)".into()));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidConfig("xi must lie in (0, 1)".into()));
        }
        if self.max_window == 0 {
            return Err(Error::InvalidConfig("max_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Polynomial from the cofactor expansion along the last row `(1, w, …, w^n)`
/// of an `(n+1)×(n+1)` determinant whose first `n` rows are `rows`.
///
/// `magnitudes` bounds the rounding error of each entry of `rows`; it sets the
/// scale below which the polynomial counts as degenerate.
fn bordered_polynomial(rows: &[Vec<f64>], magnitudes: &[Vec<f64>]) -> Result<PolyCoeffs> {
    let n = rows.len();
    let coeffs: Vec<f64> = (0..=n)
        .map(|j| {
            let minor = DMatrix::from_fn(n, n, |r, c| rows[r][if c < j { c } else { c + 1 }]);
            let sign = if (n + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * determinant(&minor)
        })
        .collect();
    let scale: f64 = magnitudes
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .product();
    PolyCoeffs::new(coeffs)?.trimmed(DEGENERATE_TOL * scale)
}

/// `Δ⁰_k(w)` for `k = ⌊M/2⌋`: moment rows `μ_r..μ_{r+k}` (r < k) bordered by
/// `(1, w, …, w^k)`. Its roots are the nodes of the `k`-point Gauss rule of
/// the moment sequence.
pub fn delta0_polynomial(mu: &MomentSequence) -> Result<PolyCoeffs> {
    let k = mu.order() / 2;
    if k == 0 {
        return Err(Error::TooFewMoments {
            needed: 2,
            got: mu.order(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|r| (0..=k).map(|c| mu.get(r + c)).collect())
        .collect();
    bordered_polynomial(&rows, &rows)
}

/// `Δ¹_z(η)` for odd `M`, `z = ⌊M/2⌋ + 1`: rows of shifted moments
/// `μ_{r+c+1} − w₁ μ_{r+c}` (r < z−1, c < z) bordered by `(1, η, …, η^{z−1})`.
pub fn delta1_polynomial(mu: &MomentSequence, w1: f64) -> Result<PolyCoeffs> {
    let z = mu.order() / 2 + 1;
    if mu.order() % 2 == 0 || z < 2 {
        return Err(Error::TooFewMoments {
            needed: 3,
            got: mu.order(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..z - 1)
        .map(|r| {
            (0..z)
                .map(|c| mu.get(r + c + 1) - w1 * mu.get(r + c))
                .collect()
        })
        .collect();
    let magnitudes: Vec<Vec<f64>> = (0..z - 1)
        .map(|r| {
            (0..z)
                .map(|c| mu.get(r + c + 1).abs() + (w1 * mu.get(r + c)).abs())
                .collect()
        })
        .collect();
    bordered_polynomial(&rows, &magnitudes)
}

/// Simple real roots, or an error if any root is complex or repeated.
fn simple_roots(p: &PolyCoeffs) -> Result<Vec<f64>> {
    let roots = real_simple_roots(p, ROOT_TOL)?;
    if roots.iter().any(|r| !r.simple) {
        return Err(Error::InsufficientRealRoots {
            found: roots.iter().filter(|r| r.simple).count(),
            degree: p.degree(),
        });
    }
    Ok(roots.into_iter().map(|r| r.value).collect())
}

fn snapped_floor(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= SNAP_TOL * v.abs().max(1.0) {
        r
    } else {
        v.floor()
    }
}

fn snapped_ceil(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= SNAP_TOL * v.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

/// Window `{⌊lo⌋..⌈hi⌉}` clamped at zero and to `max_window` states.
fn window_between(lo: f64, hi: f64, max_window: usize) -> Option<SupportWindow> {
    if !(lo.is_finite() && hi.is_finite()) || hi < 0.0 || lo > hi {
        return None;
    }
    let left = snapped_floor(lo).max(0.0);
    let right = snapped_ceil(hi);
    if right >= u64::MAX as f64 {
        return None;
    }
    let (left, right) = (left as u64, right as u64);
    let right = right.min(left.saturating_add(max_window as u64 - 1));
    SupportWindow::new(left, right).ok()
}

/// Roots found while building the initial window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootWindow {
    pub delta0_roots: Vec<f64>,
    pub delta1_roots: Vec<f64>,
    pub window: SupportWindow,
}

/// Initial window from the determinant roots, without any fallback.
///
/// For even `M`, `{⌊w₁⌋..⌈w_k⌉}` from the roots of `Δ⁰_k`. For odd `M`, the
/// roots of `Δ¹_z` are merged in via `⌊min(w₁, η₁)⌋..⌈max(w_k, η_z)⌉`; when
/// `Δ¹_z` degenerates (for `M = 3` the only root of `Δ⁰₁` is the mean, which
/// annihilates its leading coefficient) the `Δ⁰` window is kept.
pub fn root_window(mu: &MomentSequence, cfg: &SupportConfig) -> Result<RootWindow> {
    let w = simple_roots(&delta0_polynomial(mu)?)?;
    let (w_lo, w_hi) = (w[0], w[w.len() - 1]);
    let eta = if mu.order() % 2 == 1 {
        delta1_polynomial(mu, w_lo)
            .and_then(|p| simple_roots(&p))
            .unwrap_or_default()
    } else {
        Vec::new()
    };
    let lo = eta.first().map_or(w_lo, |e| e.min(w_lo));
    let hi = eta.last().map_or(w_hi, |e| e.max(w_hi));
    let window = window_between(lo, hi, cfg.max_window).ok_or(Error::InsufficientRealRoots {
        found: w.len(),
        degree: w.len(),
    })?;
    Ok(RootWindow {
        delta0_roots: w,
        delta1_roots: eta,
        window,
    })
}

/// Chebyshev half-width `z`.
fn chebyshev_half_width(mu1: f64, mu2: f64, cfg: &SupportConfig) -> f64 {
    match cfg.chebyshev_bound {
        ChebyshevBound::Raw => mu2 / cfg.xi,
        ChebyshevBound::Standard => ((mu2 - mu1 * mu1).max(0.0) / cfg.xi).sqrt(),
    }
}

fn chebyshev_from(mu1: f64, mu2: f64, cfg: &SupportConfig) -> SupportWindow {
    let z = chebyshev_half_width(mu1, mu2, cfg);
    window_between(mu1 - z, mu1 + z, cfg.max_window)
        .unwrap_or_else(|| SupportWindow::singleton(snapped_floor(mu1).max(0.0) as u64))
}

/// `{max(0, ⌊μ₁ − z⌋)..⌈μ₁ + z⌉}` with `z` from [`SupportConfig::chebyshev_bound`].
pub fn chebyshev_window(mu: &MomentSequence, cfg: &SupportConfig) -> Result<SupportWindow> {
    if mu.order() < 2 {
        return Err(Error::TooFewMoments {
            needed: 2,
            got: mu.order(),
        });
    }
    Ok(chebyshev_from(mu.get(1), mu.get(2), cfg))
}

/// Second moment of the geometric law with mean `μ₁`, the maximum-entropy
/// law on the non-negative integers under a mean constraint.
fn geometric_second_moment(mu1: f64) -> f64 {
    mu1 + 2.0 * mu1 * mu1
}

/// Chebyshev half-width for `mu`, filling in `μ₂` when only the mean is known.
pub fn chebyshev_extent(mu: &MomentSequence, cfg: &SupportConfig) -> f64 {
    let mu1 = mu.mean().unwrap_or(0.0);
    let mu2 = if mu.order() >= 2 {
        mu.get(2)
    } else {
        geometric_second_moment(mu1)
    };
    chebyshev_half_width(mu1, mu2, cfg)
}

/// Starting window for the reconstruction.
///
/// Uses [`root_window`] when `M ≥ 2` and its roots are real, simple and
/// bracket the mean; otherwise [`chebyshev_window`]. With only a mean
/// (`M = 1`) the Chebyshev window of the matching geometric law is used, and
/// with `M = 0` the single state `{0..0}`.
pub fn initial_window(mu: &MomentSequence, cfg: &SupportConfig) -> SupportWindow {
    match mu.order() {
        0 => SupportWindow::singleton(0),
        1 => chebyshev_from(mu.get(1), geometric_second_moment(mu.get(1)), cfg),
        _ => {
            let mean = mu.get(1);
            match root_window(mu, cfg) {
                Ok(rw) if rw.window.contains(mean.floor() as u64) || rw.window.contains(mean.ceil() as u64) => {
                    rw.window
                }
                _ => chebyshev_from(mean, mu.get(2), cfg),
            }
        }
    }
}

/// Tail test: `q(x_R) < δ_prob · max q`, and the same at `x_L > 0` when
/// [`SupportConfig::both_ends`] is set.
pub fn tail_ok(q: &FiniteDistribution, cfg: &SupportConfig) -> bool {
    let window = q.window();
    let threshold = cfg.delta_prob * q.max_prob();
    let right_ok = q.prob(window.right()) < threshold;
    let left_ok = !cfg.both_ends || window.left() == 0 || q.prob(window.left()) < threshold;
    right_ok && left_ok
}

/// Alternating one-state growth: even steps move the left edge down (clamped
/// at zero), odd steps move the right edge up.
pub fn extend_one(window: SupportWindow, step_index: usize) -> SupportWindow {
    extend_one_with(window, step_index, false)
}

/// [`extend_one`], optionally leaving the left edge untouched on even steps.
pub fn extend_one_with(window: SupportWindow, step_index: usize, literal_even_step: bool) -> SupportWindow {
    let (left, right) = if step_index % 2 == 0 {
        let left = if literal_even_step {
            window.left()
        } else {
            window.left().saturating_sub(1)
        };
        (left, window.right())
    } else {
        (window.left(), window.right() + 1)
    };
    SupportWindow::new(left, right).expect("extension preserves ordering")
}

/// Block growth by `⌈increment/2⌉` states on each side, left clamped at zero.
pub fn extend_block(window: SupportWindow, increment: u64) -> SupportWindow {
    let half = increment.div_ceil(2);
    SupportWindow::new(window.left().saturating_sub(half), window.right() + half)
        .expect("extension preserves ordering")
}

/// Block increment `l = |z − x_R⁽⁰⁾|` for the Chebyshev strategy, at least one.
pub fn block_increment(mu: &MomentSequence, initial: SupportWindow, cfg: &SupportConfig) -> u64 {
    let z = chebyshev_extent(mu, cfg);
    let l = (z - initial.right() as f64).abs().ceil();
    if l.is_finite() {
        (l as u64).clamp(1, cfg.max_window as u64)
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::validate_moments;

    fn mu(raw: &[f64]) -> MomentSequence {
        validate_moments(raw).unwrap()
    }

    fn window(l: u64, r: u64) -> SupportWindow {
        SupportWindow::new(l, r).unwrap()
    }

    /// Numeric determinant of the bordered matrix at `w`.
    fn bordered_det(rows: &[Vec<f64>], w: f64) -> f64 {
        let n = rows.len();
        let mut a = DMatrix::zeros(n + 1, n + 1);
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a[(r, c)] = *v;
            }
        }
        for c in 0..=n {
            a[(n, c)] = w.powi(c as i32);
        }
        determinant(&a)
    }

    #[test]
    fn delta0_two_moments_is_mean() {
        let p = delta0_polynomial(&mu(&[1.0, 3.7, 20.0])).unwrap();
        assert_eq!(p.degree(), 1);
        assert!((p.coeffs()[0] + 3.7).abs() < 1e-15);
        assert!((p.coeffs()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta0_two_point_law() {
        let m = mu(&[1.0, 1.0, 2.0, 4.0, 8.0]);
        let p = delta0_polynomial(&m).unwrap();
        assert_eq!(p.degree(), 2);
        // Proportional to w² − 2w.
        let lead = p.leading();
        assert!(p.coeffs()[0].abs() < 1e-14);
        assert!((p.coeffs()[1] / lead + 2.0).abs() < 1e-14);
        let rows = vec![vec![1.0, 1.0, 2.0], vec![1.0, 2.0, 4.0]];
        for i in 0..=8 {
            let w = -1.0 + 0.5 * i as f64;
            assert!((p.eval(w) - bordered_det(&rows, w)).abs() < 1e-12);
        }
        let roots = simple_roots(&p).unwrap();
        assert!(roots[0].abs() < 1e-12 && (roots[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn delta0_point_mass_is_degenerate() {
        let m = mu(&[1.0, 3.0, 9.0, 27.0, 81.0]);
        assert!(matches!(delta0_polynomial(&m), Err(Error::DegeneratePolynomial)));
    }

    #[test]
    fn delta1_examples() {
        let m = mu(&[1.0, 1.0, 2.0, 4.0]);
        let p = delta1_polynomial(&m, 0.0).unwrap();
        assert_eq!(p.coeffs(), &[-2.0, 1.0]);
        assert_eq!(simple_roots(&p).unwrap(), vec![2.0]);

        // Off-mean shift: root (μ₂ − w₁μ₁)/(μ₁ − w₁μ₀).
        let m = mu(&[1.0, 2.0, 6.0, 25.0]);
        let w1 = 0.5;
        let p = delta1_polynomial(&m, w1).unwrap();
        let root = simple_roots(&p).unwrap()[0];
        let expected = (6.0 - w1 * 2.0) / (2.0 - w1);
        assert!((root - expected).abs() < 1e-14);
        let rows = vec![vec![2.0 - w1, 6.0 - w1 * 2.0]];
        assert!((p.eval(1.3) - bordered_det(&rows, 1.3)).abs() < 1e-14);

        // At the mean the leading coefficient vanishes; only -σ² remains.
        let p = delta1_polynomial(&m, 2.0).unwrap();
        assert_eq!(p.degree(), 0);
        assert!((p.coeffs()[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn delta1_all_shifted_moments_zero() {
        // Point mass at 2 shifted by 2.
        let m = mu(&[1.0, 2.0, 4.0, 8.0]);
        assert!(matches!(delta1_polynomial(&m, 2.0), Err(Error::DegeneratePolynomial)));
    }

    #[test]
    fn initial_window_examples() {
        let cfg = SupportConfig::default();
        assert_eq!(initial_window(&mu(&[1.0, 1.0, 2.0, 4.0, 8.0]), &cfg), window(0, 2));
        assert_eq!(initial_window(&mu(&[1.0, 5.0, 26.0]), &cfg), window(5, 5));
        // μ₄ too small for a positive Hankel matrix: Δ⁰₃ has a complex pair.
        let bad = mu(&[1.0, 2.0, 5.0, 14.0, 25.0, 80.0, 300.0]);
        assert!(matches!(
            root_window(&bad, &cfg),
            Err(Error::InsufficientRealRoots { found: 1, degree: 3 })
        ));
        assert_eq!(initial_window(&bad, &cfg), chebyshev_window(&bad, &cfg).unwrap());
        // Point mass: degenerate polynomial, same fallback.
        let point = mu(&[1.0, 3.0, 9.0, 27.0, 81.0]);
        assert_eq!(initial_window(&point, &cfg), window(0, 93));
    }

    #[test]
    fn initial_window_odd_order() {
        let cfg = SupportConfig::default();
        // Poisson(2): μ = [1, 2, 6, 22, 94, 454]; Gauss nodes 1 and 4.
        let m = mu(&[1.0, 2.0, 6.0, 22.0, 94.0, 454.0]);
        let rw = root_window(&m, &cfg).unwrap();
        assert_eq!(rw.delta0_roots.len(), 2);
        assert!((rw.delta0_roots[0] - 1.0).abs() < 1e-9 && (rw.delta0_roots[1] - 4.0).abs() < 1e-9);
        // With w₁ a Gauss node the leading coefficient of Δ¹ vanishes and one
        // root remains, the other node.
        assert_eq!(rw.delta1_roots.len(), 1);
        assert!((rw.delta1_roots[0] - 4.0).abs() < 1e-9);
        assert_eq!(rw.window, window(1, 4));

        // M = 3 keeps the Δ⁰ window.
        let m3 = mu(&[1.0, 2.0, 5.0, 14.0]);
        let rw = root_window(&m3, &cfg).unwrap();
        assert!(rw.delta1_roots.is_empty());
        assert_eq!(rw.window, window(2, 2));
    }

    #[test]
    fn mean_only_window() {
        let cfg = SupportConfig::default();
        // Geometric mean 1 implies μ₂ = 3, z = 30.
        assert_eq!(initial_window(&mu(&[1.0, 1.0]), &cfg), window(0, 31));
        assert_eq!(initial_window(&mu(&[1.0]), &cfg), window(0, 0));
    }

    #[test]
    fn tail_examples() {
        let cfg = SupportConfig::default();
        let q = FiniteDistribution::new(window(0, 2), vec![0.5, 0.499, 0.001]).unwrap();
        assert!(!tail_ok(&q, &cfg));
        let q = FiniteDistribution::new(window(0, 2), vec![0.5, 0.5, 0.0]).unwrap();
        assert!(tail_ok(&q, &cfg));
        let geo = FiniteDistribution::normalized(
            window(0, 40),
            (0..=40).map(|x| 0.5f64.powi(x)).collect(),
        )
        .unwrap();
        assert!(tail_ok(&geo, &cfg));
    }

    #[test]
    fn tail_both_ends() {
        let q = FiniteDistribution::new(window(3, 5), vec![0.3, 0.7, 0.0]).unwrap();
        let mut cfg = SupportConfig::default();
        assert!(tail_ok(&q, &cfg));
        cfg.both_ends = true;
        assert!(!tail_ok(&q, &cfg));
        let anchored = FiniteDistribution::new(window(0, 2), vec![0.3, 0.7, 0.0]).unwrap();
        assert!(tail_ok(&anchored, &cfg));
    }

    #[test]
    fn extend_one_examples() {
        assert_eq!(extend_one(window(3, 7), 0), window(2, 7));
        assert_eq!(extend_one(window(0, 7), 2), window(0, 7));
        assert_eq!(extend_one(window(3, 7), 1), window(3, 8));
        assert_eq!(extend_one_with(window(3, 7), 0, true), window(3, 7));
    }

    #[test]
    fn chebyshev_examples() {
        let cfg = SupportConfig::default();
        assert_eq!(cfg.xi, 0.1);
        assert_eq!(chebyshev_window(&mu(&[1.0, 3.0, 10.0]), &cfg).unwrap(), window(0, 103));
        assert_eq!(chebyshev_window(&mu(&[1.0, 0.0, 0.0]), &cfg).unwrap(), window(0, 0));
        let capped = SupportConfig { max_window: 50, ..SupportConfig::default() };
        assert_eq!(chebyshev_window(&mu(&[1.0, 3.0, 10.0]), &capped).unwrap(), window(0, 49));
        let standard = SupportConfig {
            chebyshev_bound: ChebyshevBound::Standard,
            ..SupportConfig::default()
        };
        // σ² = 1, z = sqrt(10) ≈ 3.16.
        assert_eq!(chebyshev_window(&mu(&[1.0, 3.0, 10.0]), &standard).unwrap(), window(0, 7));
    }

    #[test]
    fn extend_block_examples() {
        assert_eq!(extend_block(window(5, 10), 4), window(3, 12));
        assert_eq!(extend_block(window(1, 10), 6), window(0, 13));
        assert_eq!(extend_block(window(1, 10), 0), window(1, 10));
        assert_eq!(extend_block(window(4, 4), 3), window(2, 6));
    }

    #[test]
    fn config_validation() {
        assert!(SupportConfig::default().validate().is_ok());
        assert!(SupportConfig { delta_prob: 1.0, ..Default::default() }.validate().is_err());
        assert!(SupportConfig { xi: 0.0, ..Default::default() }.validate().is_err());
        assert!(SupportConfig { max_window: 0, ..Default::default() }.validate().is_err());
    }
}
