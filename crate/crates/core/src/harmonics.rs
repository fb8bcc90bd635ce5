//! Real hyperspherical harmonics on `S_m`.
//!
//! A harmonic is labelled by `λ = μ_0 ≥ μ_1 ≥ … ≥ μ_{m-3} ≥ |μ_{m-2}|` and
//! factorises into one Gegenbauer factor per polar angle `θ_1 … θ_{m-3}`,
//! an associated Legendre factor in `θ_{m-2}` and a trigonometric factor in
//! `φ`. The normalisation makes the basis orthonormal for the solid-angle
//! element `dΩ_m = sin^{m-2}θ_1 … sin θ_{m-2} dθ_1 … dθ_{m-2} dφ`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::orthopoly::{assoc_legendre_unchecked, gegenbauer_table, gegenbauer_unchecked};
use crate::special::{binomial, double_factorial, ln_factorial, ln_gamma};

/// Label of one real harmonic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub lambda: u32,
    /// `μ_1 ≥ … ≥ μ_{m-3}`; empty on `S_3`.
    pub chain: Vec<u32>,
    /// Signed `μ_{m-2}`: cosine channel for positive values, sine for negative.
    pub last: i32,
}

impl MultiIndex {
    pub fn new(lambda: u32, chain: Vec<u32>, last: i32) -> Self {
        Self {
            lambda,
            chain,
            last,
        }
    }

    /// `μ_k` with `μ_0 = λ`, for `k ≤ m-3`.
    pub fn mu(&self, k: usize) -> u32 {
        if k == 0 {
            self.lambda
        } else {
            self.chain[k - 1]
        }
    }

    /// `μ_{m-3}`, the degree of the Legendre factor.
    pub fn top(&self) -> u32 {
        self.chain.last().copied().unwrap_or(self.lambda)
    }

    pub fn validate(&self, m: u32) -> Result<()> {
        if m < 3 {
            return param(format!("sphere dimension must be >= 3, got {m}"));
        }
        if self.chain.len() != (m - 3) as usize {
            return param(format!(
                "index {self} has {} chain entries, S_{m} needs {}",
                self.chain.len(),
                m - 3
            ));
        }
        let mut prev = self.lambda;
        for &mu in &self.chain {
            if mu > prev {
                return param(format!("index {self} is not a nonincreasing chain"));
            }
            prev = mu;
        }
        if self.last.unsigned_abs() > prev {
            return param(format!("index {self}: |μ_(m-2)| exceeds μ_(m-3)"));
        }
        Ok(())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.lambda)?;
        for mu in &self.chain {
            write!(f, ",{mu}")?;
        }
        write!(f, ",{})", self.last)
    }
}

/// Hyperangles `(θ_1, …, θ_{m-2}, φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleVector {
    pub thetas: Vec<f64>,
    pub phi: f64,
}

impl AngleVector {
    pub fn new(thetas: Vec<f64>, phi: f64) -> Self {
        Self { thetas, phi }
    }

    pub fn validate(&self, m: u32) -> Result<()> {
        if self.thetas.len() + 2 != m as usize {
            return param(format!(
                "S_{m} needs {} polar angles, got {}",
                m - 2,
                self.thetas.len()
            ));
        }
        for &t in &self.thetas {
            if !(0.0..=PI).contains(&t) {
                return param(format!("polar angle {t} outside [0, π]"));
            }
        }
        if !(-PI..=PI).contains(&self.phi) {
            return param(format!("azimuth {} outside [-π, π]", self.phi));
        }
        Ok(())
    }

    /// Cartesian point on the unit sphere.
    pub fn to_cartesian(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.thetas.len() + 2);
        let mut sin_prod = 1.0;
        for &t in &self.thetas {
            out.push(sin_prod * t.cos());
            sin_prod *= t.sin();
        }
        out.push(sin_prod * self.phi.cos());
        out.push(sin_prod * self.phi.sin());
        out
    }
}

/// Number of harmonics at resolution level `k` on `S_m`.
pub fn s_level(m: u32, k: u32) -> Result<u64> {
    if m < 3 {
        return param(format!("sphere dimension must be >= 3, got {m}"));
    }
    let c = binomial((k + m - 3) as u64, k as u64);
    let v = (m as u128 + 2 * k as u128 - 2) * c / (m as u128 - 2);
    u64::try_from(v).or_else(|_| param("level size overflows u64"))
}

/// Total number of harmonics of order at most `d`.
pub fn dim_d(m: u32, d: u32) -> Result<u64> {
    (0..=d).map(|k| s_level(m, k)).sum()
}

/// `N_m = 2 (m-2)!! π^{m/2} / Γ(m/2)`.
pub fn n_constant(m: u32) -> Result<f64> {
    if m < 3 {
        return param(format!("sphere dimension must be >= 3, got {m}"));
    }
    let ln = 2f64.ln() + double_factorial(m as i64 - 2).ln() + 0.5 * m as f64 * PI.ln()
        - ln_gamma(m as f64 / 2.0);
    Ok(ln.exp())
}

/// Value of `Σ_{level λ} Y²`, constant over the sphere.
pub fn sum_rule_value(m: u32, lambda: u32) -> Result<f64> {
    let nm = n_constant(m)?;
    let ln = ((m + 2 * lambda - 2) as f64).ln()
        + double_factorial(m as i64 - 4).ln()
        + ln_factorial((lambda + m - 3) as u64)
        - ln_factorial(lambda as u64)
        - ln_factorial((m - 3) as u64);
    Ok(ln.exp() / nm)
}

/// `γ̃` constant of the Gegenbauer factor on polar axis `axis` (1-based).
fn gegenbauer_constant(m: u32, axis: u32, upper: u32, lower: u32) -> f64 {
    let half = (m - axis - 1) as f64 / 2.0;
    let ln = (2 * lower + m - axis - 3) as f64 * std::f64::consts::LN_2
        + ln_factorial((upper - lower) as u64)
        + ((2 * upper + m - axis - 1) as f64).ln()
        + 2.0 * ln_gamma(lower as f64 + half)
        - PI.ln()
        - ln_factorial((upper + lower + m - axis - 2) as u64);
    (0.5 * ln).exp()
}

/// `γ` constant of the Legendre factor.
fn legendre_constant(degree: u32, order: u32) -> f64 {
    let ln = ((2 * degree + 1) as f64).ln() + ln_factorial((degree - order) as u64)
        - (4.0 * PI).ln()
        - ln_factorial((degree + order) as u64);
    (0.5 * ln).exp()
}

#[inline]
fn azimuthal_factor(freq: i32, phi: f64) -> f64 {
    match freq {
        0 => 1.0,
        f if f > 0 => SQRT_2 * (f as f64 * phi).cos(),
        f => SQRT_2 * ((-f) as f64 * phi).sin(),
    }
}

/// Single harmonic `Y_idx(angles)`.
pub fn eval_harmonic(m: u32, idx: &MultiIndex, ang: &AngleVector) -> Result<f64> {
    idx.validate(m)?;
    ang.validate(m)?;
    let mut value = 1.0;
    for axis in 1..=(m - 3) {
        let upper = idx.mu(axis as usize - 1);
        let lower = idx.mu(axis as usize);
        let theta = ang.thetas[axis as usize - 1];
        let alpha = lower as f64 + (m - axis - 1) as f64 / 2.0;
        value *= gegenbauer_constant(m, axis, upper, lower)
            * gegenbauer_unchecked(upper - lower, alpha, theta.cos())
            * theta.sin().powi(lower as i32);
    }
    let theta = ang.thetas[(m - 3) as usize];
    let order = idx.last.unsigned_abs();
    value *= legendre_constant(idx.top(), order)
        * assoc_legendre_unchecked(idx.top(), order, theta.cos(), theta.sin());
    Ok(value * azimuthal_factor(idx.last, ang.phi))
}

/// Regression model: all harmonics of order `≤ d` on `S_m`, optionally
/// restricted to a subset of resolution levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub m: u32,
    pub d: u32,
    /// Levels kept in the model; `None` keeps `0..=d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u32>>,
}

impl BasisSpec {
    pub fn new(m: u32, d: u32) -> Result<Self> {
        let spec = Self { m, d, levels: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Model made of the listed resolution levels only.
    pub fn with_levels(m: u32, d: u32, levels: &[u32]) -> Result<Self> {
        let mut lv = levels.to_vec();
        lv.sort_unstable();
        lv.dedup();
        let spec = Self {
            m,
            d,
            levels: Some(lv),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return param(format!("sphere dimension must be >= 3, got {}", self.m));
        }
        if let Some(lv) = &self.levels {
            if lv.is_empty() {
                return param("model level list is empty");
            }
            if let Some(&k) = lv.iter().find(|&&k| k > self.d) {
                return param(format!("model level {k} exceeds order {}", self.d));
            }
        }
        Ok(())
    }

    pub fn level_list(&self) -> Vec<u32> {
        match &self.levels {
            Some(lv) => lv.clone(),
            None => (0..=self.d).collect(),
        }
    }

    pub fn contains_level(&self, k: u32) -> bool {
        match &self.levels {
            Some(lv) => lv.contains(&k),
            None => k <= self.d,
        }
    }

    /// Number of regression functions.
    pub fn dim(&self) -> Result<usize> {
        let mut total = 0u64;
        for k in self.level_list() {
            total += s_level(self.m, k)?;
        }
        Ok(total as usize)
    }
}

fn push_chain(m: u32, lambda: u32, chain: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if chain.len() == (m - 3) as usize {
        let top = chain.last().copied().unwrap_or(lambda) as i32;
        for last in -top..=top {
            out.push(MultiIndex::new(lambda, chain.clone(), last));
        }
        return;
    }
    let upper = chain.last().copied().unwrap_or(lambda);
    for mu in 0..=upper {
        chain.push(mu);
        push_chain(m, lambda, chain, out);
        chain.pop();
    }
}

/// Harmonics of one resolution level in canonical order.
pub fn level_indices(m: u32, lambda: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    push_chain(m, lambda, &mut Vec::new(), &mut out);
    out
}

/// Canonical enumeration: `λ` ascending, then `μ_1, μ_2, …` ascending, then
/// `μ_{m-2}` from `-μ_{m-3}` to `μ_{m-3}`.
pub fn enumerate_indices(m: u32, d: u32) -> Result<Vec<MultiIndex>> {
    if m < 3 {
        return param(format!("sphere dimension must be >= 3, got {m}"));
    }
    Ok((0..=d)
        .flat_map(|lambda| level_indices(m, lambda))
        .collect())
}

/// Precomputed evaluator for the regression vector `f_d`.
///
/// Per-axis factor tables are filled once per point and every harmonic is a
/// product of table lookups.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    spec: BasisSpec,
    indices: Vec<MultiIndex>,
    /// `(m-2) + 1` table offsets per harmonic (axes, then azimuth slot).
    offsets: Vec<usize>,
    /// `γ̃` per Gegenbauer axis, indexed `upper * (d+1) + lower`.
    gegen_constants: Vec<Vec<f64>>,
    legendre_constants: Vec<f64>,
}

/// Scratch space for [`HarmonicBasis::eval_into`].
#[derive(Debug, Clone, Default)]
pub struct BasisScratch {
    tables: Vec<Vec<f64>>,
    azimuth: Vec<f64>,
    poly: Vec<f64>,
}

impl HarmonicBasis {
    pub fn new(spec: &BasisSpec) -> Result<Self> {
        spec.validate()?;
        let m = spec.m;
        let d = spec.d;
        let stride = (d + 1) as usize;
        let indices: Vec<MultiIndex> = spec
            .level_list()
            .into_iter()
            .flat_map(|lambda| level_indices(m, lambda))
            .collect();
        let n_axes = (m - 2) as usize;
        let mut offsets = Vec::with_capacity(indices.len() * (n_axes + 1));
        for idx in &indices {
            for axis in 0..n_axes - 1 {
                offsets.push(idx.mu(axis) as usize * stride + idx.mu(axis + 1) as usize);
            }
            offsets.push(idx.top() as usize * stride + idx.last.unsigned_abs() as usize);
            offsets.push((idx.last + d as i32) as usize);
        }
        let gegen_constants = (1..=m.saturating_sub(3))
            .map(|axis| {
                let mut table = vec![0.0; stride * stride];
                for upper in 0..=d {
                    for lower in 0..=upper {
                        table[upper as usize * stride + lower as usize] =
                            gegenbauer_constant(m, axis, upper, lower);
                    }
                }
                table
            })
            .collect();
        let mut legendre_constants = vec![0.0; stride * stride];
        for degree in 0..=d {
            for order in 0..=degree {
                legendre_constants[degree as usize * stride + order as usize] =
                    legendre_constant(degree, order);
            }
        }
        Ok(Self {
            spec: spec.clone(),
            indices,
            offsets,
            gegen_constants,
            legendre_constants,
        })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn m(&self) -> u32 {
        self.spec.m
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|i| i == idx)
    }

    pub fn eval(&self, ang: &AngleVector) -> Result<Vec<f64>> {
        ang.validate(self.spec.m)?;
        let mut out = vec![0.0; self.dim()];
        self.eval_into(&ang.thetas, ang.phi, &mut BasisScratch::default(), &mut out);
        Ok(out)
    }

    /// Fills `out` with `f_d(θ, φ)`; angles are not range-checked.
    pub fn eval_into(&self, thetas: &[f64], phi: f64, scratch: &mut BasisScratch, out: &mut [f64]) {
        let m = self.spec.m;
        let d = self.spec.d;
        let stride = (d + 1) as usize;
        let n_axes = (m - 2) as usize;
        scratch.tables.resize_with(n_axes, Vec::new);

        for axis in 1..n_axes {
            let theta = thetas[axis - 1];
            let (x, s) = (theta.cos(), theta.sin());
            let half = (m as usize - axis - 1) as f64 / 2.0;
            let consts = &self.gegen_constants[axis - 1];
            let table = &mut scratch.tables[axis - 1];
            table.clear();
            table.resize(stride * stride, 0.0);
            let mut sin_pow = 1.0;
            for lower in 0..=d {
                gegenbauer_table(d - lower, lower as f64 + half, x, &mut scratch.poly);
                for upper in lower..=d {
                    let k = upper as usize * stride + lower as usize;
                    table[k] = consts[k] * scratch.poly[(upper - lower) as usize] * sin_pow;
                }
                sin_pow *= s;
            }
        }
        {
            let theta = thetas[n_axes - 1];
            let (x, s) = (theta.cos(), theta.sin());
            let table = &mut scratch.tables[n_axes - 1];
            table.clear();
            table.resize(stride * stride, 0.0);
            for degree in 0..=d {
                for order in 0..=degree {
                    let k = degree as usize * stride + order as usize;
                    table[k] =
                        self.legendre_constants[k] * assoc_legendre_unchecked(degree, order, x, s);
                }
            }
        }
        scratch.azimuth.clear();
        scratch
            .azimuth
            .extend((-(d as i32)..=d as i32).map(|f| azimuthal_factor(f, phi)));

        let per = n_axes + 1;
        for (j, slot) in out.iter_mut().enumerate() {
            let offs = &self.offsets[j * per..(j + 1) * per];
            let mut v = scratch.azimuth[offs[n_axes]];
            for (table, &o) in scratch.tables.iter().zip(&offs[..n_axes]) {
                v *= table[o];
            }
            *slot = v;
        }
    }
}

/// `f_d(angles)` for the full order-`d` basis (or the spec's level subset).
pub fn eval_basis(spec: &BasisSpec, ang: &AngleVector) -> Result<Vec<f64>> {
    HarmonicBasis::new(spec)?.eval(ang)
}
