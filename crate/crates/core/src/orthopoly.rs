//! Gegenbauer and associated Legendre polynomials.
//!
//! Gegenbauer polynomials `C_n^α` are orthogonal on `[-1, 1]` with respect to
//! `(1 - x²)^(α - 1/2)`. The associated Legendre functions carry the
//! Condon–Shortley phase `(-1)^m`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{param, Error, Result};
use crate::special::{double_factorial, ln_factorial, ln_gamma};

/// Degree and parameter of a polynomial family member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolynomialFamilySpec {
    Gegenbauer { degree: u32, alpha: f64 },
    AssocLegendre { degree: u32, order: u32 },
}

impl PolynomialFamilySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PolynomialFamilySpec::Gegenbauer { alpha, .. } => check_alpha(alpha),
            PolynomialFamilySpec::AssocLegendre { degree, order } => {
                if order > degree {
                    return param(format!(
                        "associated Legendre order {order} exceeds degree {degree}"
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match *self {
            PolynomialFamilySpec::Gegenbauer { degree, alpha } => gegenbauer(degree, alpha, x),
            PolynomialFamilySpec::AssocLegendre { degree, order } => {
                assoc_legendre(degree, order, x)
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return param(format!(
            "Gegenbauer parameter must be positive, got {alpha}"
        ));
    }
    Ok(())
}

/// `C_n^α(x)` by upward three-term recurrence.
pub fn gegenbauer(n: u32, alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(gegenbauer_unchecked(n, alpha, x))
}

#[inline]
pub(crate) fn gegenbauer_unchecked(n: u32, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 2.0 * alpha * x;
    for k in 2..=n {
        let k = k as f64;
        let next = (2.0 * (k + alpha - 1.0) * x * cur - (k + 2.0 * alpha - 2.0) * prev) / k;
        prev = cur;
        cur = next;
    }
    cur
}

/// All values `C_0^α(x), …, C_n^α(x)`.
pub(crate) fn gegenbauer_table(n: u32, alpha: f64, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n == 0 {
        return;
    }
    out.push(2.0 * alpha * x);
    for k in 2..=n as usize {
        let kf = k as f64;
        let v = (2.0 * (kf + alpha - 1.0) * x * out[k - 1] - (kf + 2.0 * alpha - 2.0) * out[k - 2])
            / kf;
        out.push(v);
    }
}

/// `∫_{-1}^{1} (1 - x²)^(α - 1/2) [C_n^α(x)]² dx`
///
/// Closed form `π 2^(1-2α) Γ(n + 2α) / (n! (n + α) Γ(α)²)`, evaluated in log space.
pub fn gegenbauer_norm_sq(n: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(gegenbauer_norm_sq_unchecked(n, alpha))
}

pub(crate) fn gegenbauer_norm_sq_unchecked(n: u32, alpha: f64) -> f64 {
    let nf = n as f64;
    let ln = std::f64::consts::PI.ln()
        + (1.0 - 2.0 * alpha) * std::f64::consts::LN_2
        + ln_gamma(nf + 2.0 * alpha)
        - ln_factorial(n as u64)
        - (nf + alpha).ln()
        - 2.0 * ln_gamma(alpha);
    ln.exp()
}

/// Associated Legendre function `P_l^m(x)` including the Condon–Shortley phase.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> Result<f64> {
    if m > l {
        return param(format!("associated Legendre order {m} exceeds degree {l}"));
    }
    if !(-1.0..=1.0).contains(&x) {
        return param(format!("associated Legendre argument {x} outside [-1, 1]"));
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    Ok(assoc_legendre_unchecked(l, m, x, s))
}

/// `P_l^m(x)` given `s = sqrt(1 - x²)` (pass `sin θ` directly to avoid cancellation).
pub(crate) fn assoc_legendre_unchecked(l: u32, m: u32, x: f64, s: f64) -> f64 {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pmm = sign * double_factorial(2 * m as i64 - 1) * s.powi(m as i32);
    if l == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = (x * (2 * ll - 1) as f64 * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Roots of `C_n^α`, strictly increasing.
///
/// Eigenvalues of the symmetric tridiagonal Jacobi matrix of the orthonormal
/// Gegenbauer recurrence, followed by one Newton step and exact symmetrisation.
pub fn gegenbauer_roots(n: u32, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if n == 0 {
        return param("root count must be at least 1");
    }
    let size = n as usize;
    let mut jacobi = DMatrix::<f64>::zeros(size, size);
    for k in 1..size {
        let kf = k as f64;
        let b = (kf * (kf + 2.0 * alpha - 1.0) / (4.0 * (kf + alpha) * (kf + alpha - 1.0))).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::try_new(jacobi, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric(format!(
            "Jacobi eigen-solver did not converge for n={n}, alpha={alpha}"
        ))
    })?;
    let mut roots: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    for x in roots.iter_mut() {
        let f = gegenbauer_unchecked(n, alpha, *x);
        let df = 2.0 * alpha * gegenbauer_unchecked(n - 1, alpha + 1.0, *x);
        if df != 0.0 {
            let step = f / df;
            if step.abs() < 1e-6 {
                *x -= step;
            }
        }
    }
    // exact mirror symmetry about the origin
    for j in 0..size / 2 {
        let v = 0.5 * (roots[size - 1 - j] - roots[j]);
        roots[j] = -v;
        roots[size - 1 - j] = v;
    }
    if size % 2 == 1 {
        roots[size / 2] = 0.0;
    }
    for w in roots.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Numeric(format!(
                "Gegenbauer roots not strictly increasing (n={n}, alpha={alpha})"
            )));
        }
    }
    Ok(roots)
}
