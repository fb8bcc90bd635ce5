//! Approximate designs on the hyperangle domain and their information matrices.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::harmonics::{n_constant, AngleVector, BasisScratch, BasisSpec, HarmonicBasis};
use crate::parallel::{map_chunks, DEFAULT_CHUNK};
use crate::quadrature::{gauss_rule, WeightSpec};
use crate::special::{compensated_sum, double_factorial, KahanSum};

const WEIGHT_SUM_TOL: f64 = 1e-13;

/// Which coordinate a marginal lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Polar angle `θ_i` on `[0, π]`, 1-based.
    Theta(u32),
    /// Azimuth `φ` on `[-π, π]`.
    Phi,
}

/// One-dimensional design with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDesign {
    axis: Axis,
    support: Vec<f64>,
    weights: Vec<f64>,
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return param("design weights must be positive and finite");
    }
    let total = compensated_sum(weights.iter().copied());
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return param(format!("design weights sum to {total}, expected 1"));
    }
    Ok(())
}

impl MarginalDesign {
    pub fn new(axis: Axis, support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return param("marginal needs matching, nonempty support and weight lists");
        }
        check_weights(&weights)?;
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return param("marginal support must be strictly increasing");
        }
        let (lo, hi) = match axis {
            Axis::Theta(i) if i >= 1 => (0.0, PI),
            Axis::Theta(_) => return param("polar axes are numbered from 1"),
            Axis::Phi => (-PI, PI),
        };
        if support.iter().any(|x| !(lo..=hi).contains(x)) {
            return param(format!("marginal support outside [{lo}, {hi}]"));
        }
        Ok(Self {
            axis,
            support,
            weights,
        })
    }

    /// Equal weights on the given support.
    pub fn uniform(axis: Axis, support: Vec<f64>) -> Result<Self> {
        let w = 1.0 / support.len() as f64;
        let weights = vec![w; support.len()];
        Self::new(axis, support, weights)
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// `t` equally weighted azimuths `φ_j = β + 2πj/t`, `j = 1..=t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquispacedAzimuth {
    pub t: u32,
    pub beta: f64,
}

impl EquispacedAzimuth {
    pub fn new(t: u32, beta: f64) -> Result<Self> {
        if t == 0 {
            return param("azimuthal design needs t >= 1");
        }
        let lower = -(t as f64 + 1.0) / t as f64 * PI;
        if !(beta > lower && beta <= -PI) {
            return param(format!(
                "beta = {beta} outside (-(t+1)π/t, -π] = ({lower}, {})",
                -PI
            ));
        }
        Ok(Self { t, beta })
    }

    pub fn points(&self) -> Vec<f64> {
        (1..=self.t)
            .map(|j| (self.beta + 2.0 * PI * j as f64 / self.t as f64).clamp(-PI, PI))
            .collect()
    }

    pub fn marginal(&self) -> MarginalDesign {
        MarginalDesign::uniform(Axis::Phi, self.points()).expect("equispaced azimuths are valid")
    }
}

/// Tensor design `ζ_1 ⊗ … ⊗ ζ_{m-2} ⊗ ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDesign {
    m: u32,
    d: u32,
    marginals: Vec<MarginalDesign>,
    azimuthal: EquispacedAzimuth,
}

impl ProductDesign {
    pub fn new(
        m: u32,
        d: u32,
        marginals: Vec<MarginalDesign>,
        azimuthal: EquispacedAzimuth,
    ) -> Result<Self> {
        if m < 3 {
            return param(format!("sphere dimension must be >= 3, got {m}"));
        }
        if marginals.len() != (m - 2) as usize {
            return param(format!(
                "S_{m} needs {} polar marginals, got {}",
                m - 2,
                marginals.len()
            ));
        }
        for (i, marg) in marginals.iter().enumerate() {
            if marg.axis != Axis::Theta(i as u32 + 1) {
                return param(format!("marginal {} is tagged {:?}", i + 1, marg.axis));
            }
        }
        EquispacedAzimuth::new(azimuthal.t, azimuthal.beta)?;
        Ok(Self {
            m,
            d,
            marginals,
            azimuthal,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn marginals(&self) -> &[MarginalDesign] {
        &self.marginals
    }

    pub fn azimuthal(&self) -> EquispacedAzimuth {
        self.azimuthal
    }

    /// `t · Π r_i`
    pub fn support_size(&self) -> usize {
        self.marginals.iter().map(|m| m.len()).product::<usize>() * self.azimuthal.t as usize
    }

    /// Support points in lexicographic order of the marginal indices
    /// (`θ_1` slowest, `φ` fastest).
    pub fn expand(&self) -> Vec<WeightedPoint> {
        let phis = self.azimuthal.points();
        let w_phi = 1.0 / self.azimuthal.t as f64;
        let mut out = Vec::with_capacity(self.support_size());
        let mut counters = vec![0usize; self.marginals.len()];
        loop {
            let thetas: Vec<f64> = counters
                .iter()
                .zip(&self.marginals)
                .map(|(&c, m)| m.support[c])
                .collect();
            let w_theta: f64 = counters
                .iter()
                .zip(&self.marginals)
                .map(|(&c, m)| m.weights[c])
                .product();
            for &phi in &phis {
                out.push(WeightedPoint {
                    thetas: thetas.clone(),
                    phi,
                    weight: w_theta * w_phi,
                });
            }
            let mut axis = self.marginals.len();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                counters[axis] += 1;
                if counters[axis] < self.marginals[axis].len() {
                    break;
                }
                counters[axis] = 0;
            }
        }
    }
}

/// Finite design on arbitrary hyperangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPointDesign {
    points: Vec<AngleVector>,
    weights: Vec<f64>,
}

impl SupportPointDesign {
    pub fn new(points: Vec<AngleVector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return param("design needs matching, nonempty point and weight lists");
        }
        check_weights(&weights)?;
        let m = points[0].thetas.len() as u32 + 2;
        for p in &points {
            p.validate(m)?;
        }
        Ok(Self { points, weights })
    }

    pub fn m(&self) -> u32 {
        self.points[0].thetas.len() as u32 + 2
    }

    pub fn points(&self) -> &[AngleVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expand(&self) -> Vec<WeightedPoint> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| WeightedPoint {
                thetas: p.thetas.clone(),
                phi: p.phi,
                weight: w,
            })
            .collect()
    }
}

/// One support point with its mass.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub thetas: Vec<f64>,
    pub phi: f64,
    pub weight: f64,
}

/// Either kind of design.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Product(ProductDesign),
    Points(SupportPointDesign),
}

impl Design {
    pub fn m(&self) -> u32 {
        match self {
            Design::Product(p) => p.m(),
            Design::Points(p) => p.m(),
        }
    }

    pub fn expand(&self) -> Vec<WeightedPoint> {
        match self {
            Design::Product(p) => p.expand(),
            Design::Points(p) => p.expand(),
        }
    }

    /// Flattens to an explicit support-point design.
    pub fn to_points(&self) -> SupportPointDesign {
        match self {
            Design::Points(p) => p.clone(),
            Design::Product(p) => {
                let pts = p.expand();
                SupportPointDesign {
                    weights: pts.iter().map(|w| w.weight).collect(),
                    points: pts
                        .into_iter()
                        .map(|w| AngleVector::new(w.thetas, w.phi))
                        .collect(),
                }
            }
        }
    }
}

impl From<ProductDesign> for Design {
    fn from(d: ProductDesign) -> Self {
        Design::Product(d)
    }
}

impl From<SupportPointDesign> for Design {
    fn from(d: SupportPointDesign) -> Self {
        Design::Points(d)
    }
}

/// Total solid angle `Ω̃ = N_m / (m-2)!!` of `S_m`.
pub fn omega_tilde(m: u32) -> Result<f64> {
    Ok(n_constant(m)? / double_factorial(m as i64 - 2))
}

/// Discrete design whose information matrix equals that of the uniform
/// distribution: Gauss marginals in `cos θ_i` and `t` equispaced azimuths.
pub fn optimal_product_design(m: u32, d: u32, r: u32, t: u32, beta: f64) -> Result<ProductDesign> {
    if m < 3 {
        return param(format!("sphere dimension must be >= 3, got {m}"));
    }
    let r_lo = d + 1;
    let r_hi = (2 * d).max(d + 1);
    if r < r_lo || r > r_hi {
        return param(format!(
            "r = {r} violates d+1 <= r <= max(2d, d+1) (d = {d})"
        ));
    }
    if t < 2 * d + 1 {
        return param(format!("t = {t} violates t >= 2d+1 = {}", 2 * d + 1));
    }
    let azimuthal = EquispacedAzimuth::new(t, beta)?;
    let marginals = (1..=m - 2)
        .map(|axis| {
            let weight = WeightSpec::for_axis(m, axis)?;
            let rule = gauss_rule(weight.exponent, r)?;
            let support: Vec<f64> = rule
                .nodes()
                .iter()
                .rev()
                .map(|x| x.clamp(-1.0, 1.0).acos())
                .collect();
            let weights: Vec<f64> = rule.weights().iter().rev().copied().collect();
            MarginalDesign::new(Axis::Theta(axis), support, weights)
        })
        .collect::<Result<Vec<_>>>()?;
    ProductDesign::new(m, d, marginals, azimuthal)
}

/// Symmetric positive semidefinite moment matrix `∫ f fᵀ dξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationMatrix {
    matrix: DMatrix<f64>,
}

impl InformationMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return param("information matrix must be square");
        }
        let n = matrix.nrows();
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-13 * scale.max(1.0) {
                    return param("information matrix is not symmetric");
                }
            }
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    /// `c · I_dim`
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim) * c,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Eigenvalues in nondecreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        ev
    }

    /// Numerical rank with relative threshold `1e-10 · λ_max`.
    pub fn rank(&self) -> usize {
        let ev = self.eigenvalues();
        let top = ev.last().copied().unwrap_or(0.0).max(0.0);
        ev.iter().filter(|&&v| v > 1e-10 * top).count()
    }

    /// `max |M_ij − c δ_ij|`
    pub fn identity_residual(&self, c: f64) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { c } else { 0.0 };
                worst = worst.max((self.matrix[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn is_psd(&self) -> bool {
        let ev = self.eigenvalues();
        let top = ev.last().copied().unwrap_or(0.0).abs();
        ev.first().is_none_or(|&v| v >= -1e-10 * top)
    }

    /// `T M Tᵀ`
    pub fn transform(&self, t: &DMatrix<f64>) -> Result<Self> {
        if t.ncols() != self.dim() {
            return param(format!(
                "transform has {} columns, matrix dimension is {}",
                t.ncols(),
                self.dim()
            ));
        }
        let mut out = t * &self.matrix * t.transpose();
        symmetrize(&mut out);
        Ok(Self { matrix: out })
    }

    /// Principal submatrix on the given coordinates.
    pub fn select(&self, coords: &[usize]) -> Self {
        let n = coords.len();
        Self {
            matrix: DMatrix::from_fn(n, n, |i, j| self.matrix[(coords[i], coords[j])]),
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Compensated upper-triangle accumulator for `Σ w f fᵀ`.
struct Accumulator {
    dim: usize,
    cells: Vec<KahanSum>,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            cells: vec![KahanSum::new(); dim * (dim + 1) / 2],
        }
    }

    fn add_outer(&mut self, w: f64, f: &[f64]) {
        let mut k = 0;
        for i in 0..self.dim {
            let wi = w * f[i];
            for fj in &f[i..] {
                self.cells[k].add(wi * fj);
                k += 1;
            }
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
    }

    fn finish(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.cells[k].value();
                out[(i, j)] = v;
                out[(j, i)] = v;
                k += 1;
            }
        }
        out
    }
}

/// `Σ w f fᵀ` over weighted points with the given regression vector.
///
/// Points are processed in fixed chunks, reduced in order.
pub fn moment_matrix<F>(points: &[WeightedPoint], dim: usize, eval: F) -> DMatrix<f64>
where
    F: Fn(&WeightedPoint, &mut BasisScratch, &mut [f64]) + Sync + Send,
{
    let partials = map_chunks(points, DEFAULT_CHUNK, |chunk| {
        let mut acc = Accumulator::new(dim);
        let mut scratch = BasisScratch::default();
        let mut f = vec![0.0; dim];
        for p in chunk {
            eval(p, &mut scratch, &mut f);
            acc.add_outer(p.weight, &f);
        }
        acc
    });
    let mut total = Accumulator::new(dim);
    for part in &partials {
        total.merge(part);
    }
    total.finish()
}

/// Information matrix of a design for the harmonic regression model.
pub fn info_matrix(design: &Design, basis: &HarmonicBasis) -> Result<InformationMatrix> {
    if design.m() != basis.m() {
        return param(format!(
            "design lives on S_{} but the model on S_{}",
            design.m(),
            basis.m()
        ));
    }
    let points = design.expand();
    let matrix = moment_matrix(&points, basis.dim(), |p, scratch, out| {
        basis.eval_into(&p.thetas, p.phi, scratch, out)
    });
    Ok(InformationMatrix::from_matrix_unchecked(matrix))
}

/// `I_D / Ω̃`, the information matrix of the uniform distribution on `S_m`.
pub fn uniform_continuous_info(spec: &BasisSpec) -> Result<InformationMatrix> {
    let dim = spec.dim()?;
    Ok(InformationMatrix::scaled_identity(
        dim,
        1.0 / omega_tilde(spec.m)?,
    ))
}

/// The two `S_4`, order-4 comparison designs: a uniform grid with polar
/// support `{0, π/4, π/2, 3π/4, π}`, and equal weights on the support of the
/// optimal design. Both use the optimal azimuthal design (`t = 9`, `β = -π`).
pub fn comparison_designs_example1() -> (ProductDesign, ProductDesign) {
    let nu = EquispacedAzimuth::new(9, -PI).expect("valid azimuth");
    let grid: Vec<f64> = (0..5).map(|k| k as f64 * PI / 4.0).collect();
    let grid_design = ProductDesign::new(
        4,
        4,
        vec![
            MarginalDesign::uniform(Axis::Theta(1), grid.clone()).expect("grid"),
            MarginalDesign::uniform(Axis::Theta(2), grid).expect("grid"),
        ],
        nu,
    )
    .expect("grid design");
    let optimal = optimal_product_design(4, 4, 5, 9, -PI).expect("optimal design");
    let equal_weight = ProductDesign::new(
        4,
        4,
        optimal
            .marginals()
            .iter()
            .map(|m| MarginalDesign::uniform(m.axis(), m.support().to_vec()).expect("support"))
            .collect(),
        nu,
    )
    .expect("equal-weight design");
    (grid_design, equal_weight)
}

/// Integer run counts summing to `n` by largest-remainder apportionment of `n·w`.
pub fn round_to_counts(weights: &[f64], n: u64) -> Result<Vec<u64>> {
    check_weights(weights)?;
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<u64> = raw.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    Ok(counts)
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Serialize, Deserialize)]
struct MarginalJson {
    axis: u32,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProductJson {
    m: u32,
    d: u32,
    marginals: Vec<MarginalJson>,
    azimuthal: EquispacedAzimuth,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointsJson {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum DesignJson {
    Product(ProductJson),
    Points(PointsJson),
}

impl Design {
    pub fn to_json(&self) -> Result<String> {
        let doc = match self {
            Design::Product(p) => DesignJson::Product(ProductJson {
                m: p.m,
                d: p.d,
                marginals: p
                    .marginals
                    .iter()
                    .enumerate()
                    .map(|(i, m)| MarginalJson {
                        axis: i as u32 + 1,
                        nodes: m.support.clone(),
                        weights: m.weights.clone(),
                    })
                    .collect(),
                azimuthal: p.azimuthal,
            }),
            Design::Points(p) => DesignJson::Points(PointsJson {
                points: p
                    .points
                    .iter()
                    .map(|a| {
                        a.thetas
                            .iter()
                            .copied()
                            .chain(std::iter::once(a.phi))
                            .collect()
                    })
                    .collect(),
                weights: p.weights.clone(),
            }),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DesignJson = serde_json::from_str(text)?;
        match doc {
            DesignJson::Product(p) => {
                let marginals = p
                    .marginals
                    .into_iter()
                    .map(|m| MarginalDesign::new(Axis::Theta(m.axis), m.nodes, m.weights))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Design::Product(ProductDesign::new(
                    p.m,
                    p.d,
                    marginals,
                    p.azimuthal,
                )?))
            }
            DesignJson::Points(p) => {
                let points = p
                    .points
                    .into_iter()
                    .map(|mut v| {
                        if v.len() < 2 {
                            return Err(Error::Parameter(
                                "support point needs at least one polar angle and φ".into(),
                            ));
                        }
                        let phi = v.pop().expect("nonempty");
                        Ok(AngleVector::new(v, phi))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Design::Points(SupportPointDesign::new(points, p.weights)?))
            }
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
