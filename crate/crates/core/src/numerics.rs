//! Numeric kernels: log-domain summation, damped symmetric solves,
//! determinants and real polynomial roots.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for classifying a complex eigenvalue as a real root.
pub const ROOT_TOL: f64 = 1e-8;

/// Relative residual a damped solve must reach.
const SOLVE_RESIDUAL: f64 = 1e-10;

/// `ln Σ exp(tᵢ)` with the maximum factored out.
///
/// Returns `-∞` when every term is `-∞` (or the slice is empty).
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max.is_infinite() || max.is_nan() {
        return max;
    }
    let top = terms.iter().position(|&t| t == max).unwrap_or(0);
    let rest: f64 = terms
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, t)| (t - max).exp())
        .sum();
    max + rest.ln_1p()
}

/// Error-free product: `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Dot product evaluated as if in twice the working precision.
pub fn dot2(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (x, y) in a.into_iter().zip(b) {
        let (p, ep) = two_prod(x, y);
        let (s, es) = two_sum(sum, p);
        sum = s;
        comp += ep + es;
    }
    sum + comp
}

/// Solves `(H + γ·diag(H)) s = g`.
///
/// `H` must be symmetric with a strictly positive diagonal.
pub fn solve_damped(h: &DMatrix<f64>, gamma: f64, g: &DVector<f64>) -> Result<DVector<f64>> {
    let diag: Vec<f64> = h.diagonal().iter().copied().collect();
    if let Some(index) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::NonPositiveDiagonal { index });
    }
    solve_damped_with(h, gamma, &diag, g)
}

/// Solves `(H + γ·diag(d)) s = g` for an explicit positive damping diagonal `d`.
///
/// The system is Jacobi-scaled, factored (Cholesky, then LU with partial
/// pivoting if that fails) and refined with residuals evaluated in doubled
/// precision. Fails with [`Error::Singular`] unless the relative residual
/// drops to 1e-10.
pub fn solve_damped_with(
    h: &DMatrix<f64>,
    gamma: f64,
    damping: &[f64],
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = h.nrows();
    if h.ncols() != n || g.len() != n || damping.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.len(),
        });
    }
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let system = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            h[(i, i)] + gamma * damping[i]
        } else {
            h[(i, j)]
        }
    });
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = system[(i, i)];
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d.sqrt())
            } else {
                Err(Error::Singular)
            }
        })
        .collect::<Result<_>>()?;
    let scaled = DMatrix::from_fn(n, n, |i, j| system[(i, j)] * scale[i] * scale[j]);
    let rhs = DVector::from_fn(n, |i, _| g[i] * scale[i]);
    let rhs_norm = rhs.amax();
    if rhs_norm == 0.0 {
        return Ok(DVector::zeros(n));
    }

    let solve: Box<dyn Fn(&DVector<f64>) -> Option<DVector<f64>>> =
        match scaled.clone().cholesky() {
            Some(chol) => Box::new(move |b| Some(chol.solve(b))),
            None => {
                let lu = scaled.clone().lu();
                if !lu.is_invertible() {
                    return Err(Error::Singular);
                }
                Box::new(move |b| lu.solve(b))
            }
        };

    let residual = |y: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            dot2(
                scaled.row(i).iter().copied().chain(std::iter::once(-1.0)),
                y.iter().copied().chain(std::iter::once(rhs[i])),
            )
        })
    };

    let mut y = solve(&rhs).ok_or(Error::Singular)?;
    let mut r = residual(&y);
    for _ in 0..4 {
        if !(r.amax() > SOLVE_RESIDUAL * rhs_norm * 1e-3) {
            break;
        }
        let correction = solve(&r).ok_or(Error::Singular)?;
        y -= correction;
        r = residual(&y);
    }
    if !(r.amax() <= SOLVE_RESIDUAL * rhs_norm) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(DVector::from_fn(n, |i, _| y[i] * scale[i]))
}

/// Determinant by LU factorization with partial pivoting.
pub fn determinant(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square(), "determinant of a non-square matrix");
    if a.nrows() == 0 {
        return 1.0;
    }
    a.clone().lu().determinant()
}

/// Polynomial in power basis: `coeffs[i]` multiplies `w^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    coeffs: Vec<f64>,
}

impl PolyCoeffs {
    /// Builds a polynomial, dropping exactly-zero leading coefficients.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::DegeneratePolynomial);
        }
        Ok(PolyCoeffs { coeffs })
    }

    /// Drops leading coefficients whose magnitude is at most `threshold`.
    pub fn trimmed(mut self, threshold: f64) -> Result<Self> {
        while self.coeffs.last().is_some_and(|c| c.abs() <= threshold) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            return Err(Error::DegeneratePolynomial);
        }
        Ok(self)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.degree()]
    }

    /// Horner evaluation.
    pub fn eval(&self, w: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * w + c)
    }

    pub fn derivative_at(&self, w: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * w + i as f64 * c)
    }

    /// `Σ |cᵢ| |w|^i`, the natural rounding scale of `eval(w)`.
    pub fn magnitude_at(&self, w: f64) -> f64 {
        let w = w.abs();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * w + c.abs())
    }
}

/// A real root and whether it is isolated from every other root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub value: f64,
    pub simple: bool,
}

/// Real roots of `p` in ascending order, from companion-matrix eigenvalues.
///
/// Eigenvalues whose imaginary part exceeds `tol·(1+|root|)` are discarded.
/// Fails with [`Error::InsufficientRealRoots`] unless all `degree` roots are
/// real.
pub fn real_simple_roots(p: &PolyCoeffs, tol: f64) -> Result<Vec<RealRoot>> {
    let degree = p.degree();
    if degree == 0 {
        return Err(Error::InsufficientRealRoots { found: 0, degree });
    }
    let lead = p.leading();
    let eigen: Vec<(f64, f64)> = if degree == 1 {
        vec![(-p.coeffs()[0] / lead, 0.0)]
    } else {
        let companion = DMatrix::from_fn(degree, degree, |i, j| {
            if j == degree - 1 {
                -p.coeffs()[i] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        companion
            .complex_eigenvalues()
            .iter()
            .map(|c| (c.re, c.im))
            .collect()
    };

    let mut roots: Vec<f64> = eigen
        .iter()
        .filter(|(re, im)| im.abs() <= tol * (1.0 + re.abs()))
        .map(|&(re, _)| polish(p, re))
        .collect();
    if roots.len() < degree || roots.iter().any(|r| !r.is_finite()) {
        return Err(Error::InsufficientRealRoots {
            found: roots.len(),
            degree,
        });
    }
    roots.sort_by(f64::total_cmp);

    let separation = tol.sqrt();
    Ok(roots
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let isolated = roots
                .iter()
                .enumerate()
                .all(|(j, &other)| i == j || (value - other).abs() > separation * (1.0 + value.abs()));
            RealRoot {
                value,
                simple: isolated,
            }
        })
        .collect())
}

/// A few Newton steps on `p`, kept only while they reduce `|p|`.
fn polish(p: &PolyCoeffs, mut r: f64) -> f64 {
    let mut best = p.eval(r).abs();
    for _ in 0..8 {
        let d = p.derivative_at(r);
        if d == 0.0 || best == 0.0 {
            break;
        }
        let next = r - p.eval(r) / d;
        let value = p.eval(next).abs();
        if !(value < best) {
            break;
        }
        r = next;
        best = value;
    }
    r
}
