//! Gauss-type rules for the weights `(1 - x²)^p` on `[-1, 1]`.
//!
//! Rules are normalised: weights sum to one, so a rule integrates against the
//! probability measure `(1 - x²)^p dx / ã` with `ã = ∫ (1 - x²)^p dx`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::orthopoly::{gegenbauer_norm_sq_unchecked, gegenbauer_roots, gegenbauer_table};
use crate::special::{compensated_sum, ln_gamma, KahanSum};

/// Residual tolerance used by [`verify_exactness`].
pub const EXACTNESS_TOL: f64 = 1e-11;

/// Exponent of the weight `(1 - x²)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub exponent: f64,
}

impl WeightSpec {
    pub fn new(exponent: f64) -> Result<Self> {
        check_exponent(exponent)?;
        Ok(Self { exponent })
    }

    /// Weight for polar axis `i` (1-based) of the sphere `S_m`.
    pub fn for_axis(m: u32, axis: u32) -> Result<Self> {
        if m < 3 || axis == 0 || axis > m - 2 {
            return param(format!("axis {axis} is not a polar axis of S_{m}"));
        }
        Self::new((m - axis - 2) as f64 / 2.0)
    }

    pub fn mass(&self) -> f64 {
        weight_moment(self.exponent, 0)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 0.0) || !p.is_finite() {
        return param(format!("weight exponent must be finite and >= 0, got {p}"));
    }
    Ok(())
}

/// `∫_{-1}^{1} x^ℓ (1 - x²)^p dx`.
///
/// Zero for odd `ℓ`; for even `ℓ` the Beta function `B((ℓ+1)/2, p+1)`.
pub fn weight_moment(p: f64, ell: u32) -> f64 {
    if ell % 2 == 1 {
        return 0.0;
    }
    let a = (ell as f64 + 1.0) / 2.0;
    let b = p + 1.0;
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Nodes and normalised weights with a certified degree of exactness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    degree: u32,
}

impl QuadratureRule {
    /// Builds a rule after checking the structural invariants.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, degree: u32) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return param("rule needs matching, nonempty node and weight lists");
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return param("rule nodes must be strictly increasing");
        }
        if nodes.iter().any(|x| !(-1.0..=1.0).contains(x)) {
            return param("rule nodes must lie in [-1, 1]");
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return param("rule weights must be positive");
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-13 {
            return param(format!("rule weights sum to {total}, expected 1"));
        }
        if (degree as usize) < nodes.len() {
            return param("certified degree must be at least the node count");
        }
        Ok(Self {
            nodes,
            weights,
            degree,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ ω_j f(x_j)`
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * f(x)),
        )
    }
}

/// Gaussian rule with `r` nodes for `(1 - x²)^p`.
///
/// Nodes are the roots of `C_r^(p + 1/2)`; weights are the normalised
/// integrals of the Lagrange basis polynomials. Exact to degree `2r - 1`.
pub fn gauss_rule(p: f64, r: u32) -> Result<QuadratureRule> {
    check_exponent(p)?;
    if r == 0 {
        return param("a Gauss rule needs at least one node");
    }
    let nodes = gegenbauer_roots(r, p + 0.5)?;
    let alpha = p + 0.5;
    let norms: Vec<f64> = (0..r)
        .map(|k| gegenbauer_norm_sq_unchecked(k, alpha))
        .collect();
    let mut table = Vec::with_capacity(r as usize);
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            gegenbauer_table(r - 1, alpha, x, &mut table);
            let christoffel = compensated_sum(table.iter().zip(&norms).map(|(c, h)| c * c / h));
            1.0 / (norms[0] * christoffel)
        })
        .collect();
    let total = compensated_sum(weights.iter().copied());
    weights.iter_mut().for_each(|w| *w /= total);
    let n = weights.len();
    for j in 0..n / 2 {
        let w = 0.5 * (weights[j] + weights[n - 1 - j]);
        weights[j] = w;
        weights[n - 1 - j] = w;
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Numeric(format!(
            "non-positive Gauss weight for p={p}, r={r}"
        )));
    }
    QuadratureRule::new(nodes, weights, 2 * r - 1)
}

/// Monomial coefficients (ascending) of `Π (x - roots_k)`.
fn poly_from_roots<'a>(roots: impl Iterator<Item = &'a f64>) -> Vec<f64> {
    let mut coef = vec![1.0];
    for &root in roots {
        let mut next = vec![0.0; coef.len() + 1];
        for (i, &c) in coef.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= root * c;
        }
        coef = next;
    }
    coef
}

/// `(1/ã) ∫ a(x) q(x) dx` for a polynomial in monomial form.
fn normalised_integral(coef: &[f64], p: f64) -> f64 {
    let mass = weight_moment(p, 0);
    let mut acc = KahanSum::new();
    for (ell, &c) in coef.iter().enumerate() {
        if ell % 2 == 0 {
            acc.add(c * weight_moment(p, ell as u32));
        }
    }
    acc.value() / mass
}

/// Interpolatory weights `ω_j = (1/ã) ∫ a(x) ℓ_j(x) dx` for arbitrary distinct nodes.
pub fn lagrange_weights(nodes: &[f64], p: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    if nodes.is_empty() {
        return param("need at least one node");
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return param("interpolation nodes must be distinct");
    }
    let weights = nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let others = nodes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, x)| x);
            let numerator = poly_from_roots(others);
            let denom: f64 = nodes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, &xk)| xj - xk)
                .product();
            normalised_integral(&numerator, p) / denom
        })
        .collect();
    Ok(weights)
}

/// Result of a moment-by-moment exactness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactnessReport {
    pub passed: bool,
    pub worst_degree: u32,
    pub max_residual: f64,
}

/// Checks `|∫ a x^ℓ / ã − Σ ω_j x_j^ℓ| ≤ 1e-11` for `ℓ = 0..=z`.
pub fn verify_exactness(rule: &QuadratureRule, p: f64, z: u32) -> ExactnessReport {
    let mass = weight_moment(p, 0);
    let mut worst_degree = 0;
    let mut max_residual = 0.0;
    for ell in 0..=z {
        let exact = weight_moment(p, ell) / mass;
        let approx = rule.apply(|x| x.powi(ell as i32));
        let residual = (exact - approx).abs();
        if residual > max_residual || residual.is_nan() {
            max_residual = residual;
            worst_degree = ell;
        }
    }
    ExactnessReport {
        passed: max_residual <= EXACTNESS_TOL,
        worst_degree,
        max_residual,
    }
}

/// Largest `|∫ V_r(x) a(x) x^ℓ dx|` over `ℓ = 0..=z-r`, with `V_r` the node polynomial.
///
/// Returns zero when `z < r` (no orthogonality condition to check).
pub fn node_polynomial_residual(rule: &QuadratureRule, p: f64, z: u32) -> f64 {
    let r = rule.len() as u32;
    if z < r {
        return 0.0;
    }
    let node_poly = poly_from_roots(rule.nodes().iter());
    (0..=z - r)
        .map(|ell| {
            let mut acc = KahanSum::new();
            for (i, &c) in node_poly.iter().enumerate() {
                acc.add(c * weight_moment(p, i as u32 + ell));
            }
            acc.value().abs()
        })
        .fold(0.0, f64::max)
}
