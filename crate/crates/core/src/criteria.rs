//! Selection matrices, the Kiefer `Φ_p` family, the `Φ_Es` criterion,
//! efficiencies and equivalence-theorem certificates.
//!
//! `Φ_p` uses the power mean `((1/s) tr C_K^p)^{1/p}`. The `1/s` factor
//! rescales every design by the same constant, so efficiencies and
//! optimality statements do not depend on it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::design::{info_matrix, Design, InformationMatrix};
use crate::error::{param, Error, Result};
use crate::harmonics::{s_level, AngleVector, BasisScratch, BasisSpec, HarmonicBasis};
use crate::parallel::map_ranges;

/// Relative eigenvalue cutoff for the generalized inverse.
pub const PINV_REL_TOL: f64 = 1e-10;
/// Bound on `‖(I − M M⁻) K‖_max` for estimability.
pub const ESTIMABILITY_TOL: f64 = 1e-8;
/// Relative slack allowed in equivalence certificates.
pub const CERTIFICATE_SLACK: f64 = 1e-8;

/// Strictly increasing resolution levels `k_0 < … < k_q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSelection {
    levels: Vec<u32>,
}

impl LevelSelection {
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return param("level selection must be nonempty");
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return param("levels must be strictly increasing");
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }
}

impl FromStr for LevelSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Parameter(format!("bad level '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }
}

/// `D × s` matrix whose columns are distinct standard basis vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMatrix {
    dim: usize,
    columns: Vec<usize>,
}

impl SelectionMatrix {
    pub fn from_columns(dim: usize, columns: Vec<usize>) -> Result<Self> {
        if columns.is_empty() {
            return param("selection must pick at least one coordinate");
        }
        let mut seen = vec![false; dim];
        for &c in &columns {
            if c >= dim {
                return param(format!("selected coordinate {c} outside dimension {dim}"));
            }
            if std::mem::replace(&mut seen[c], true) {
                return param(format!("coordinate {c} selected twice"));
            }
        }
        Ok(Self { dim, columns })
    }

    /// Everything: `K = I_D`.
    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            columns: (0..dim).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.dim, self.columns.len());
        for (j, &c) in self.columns.iter().enumerate() {
            k[(c, j)] = 1.0;
        }
        k
    }
}

/// Selection of the coefficients at `levels`, in the basis order of `spec`.
pub fn selection_matrix(spec: &BasisSpec, levels: &LevelSelection) -> Result<SelectionMatrix> {
    spec.validate()?;
    let mut offset = 0usize;
    let mut columns = Vec::new();
    for k in spec.level_list() {
        let size = s_level(spec.m, k)? as usize;
        if levels.levels.contains(&k) {
            columns.extend(offset..offset + size);
        }
        offset += size;
    }
    for &k in &levels.levels {
        if !spec.contains_level(k) {
            return param(format!(
                "level {k} is not part of the model (d = {})",
                spec.d
            ));
        }
    }
    SelectionMatrix::from_columns(offset, columns)
}

struct Spectral {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn spectral(m: &DMatrix<f64>) -> Spectral {
    let eig = SymmetricEigen::new(m.clone());
    Spectral {
        values: eig.eigenvalues.iter().copied().collect(),
        vectors: eig.eigenvectors,
    }
}

impl Spectral {
    fn compose(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let gk = g(lam);
            if gk == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            out.ger(gk, &v, &v, 1.0);
        }
        out
    }
}

/// Moore–Penrose inverse through the spectral decomposition.
pub fn generalized_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sp = spectral(m);
    let top = sp.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = PINV_REL_TOL * top;
    sp.compose(|l| if l > cut { 1.0 / l } else { 0.0 })
}

/// `C_K = (Kᵀ M⁻ K)⁻¹` with its eigen-decomposition.
#[derive(Debug, Clone)]
pub struct CMatrix {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl CMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues of `C_K`, nondecreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn power(&self, q: f64) -> DMatrix<f64> {
        let sp = Spectral {
            values: self.eigenvalues.clone(),
            vectors: self.eigenvectors.clone(),
        };
        sp.compose(|l| l.powf(q))
    }
}

pub fn c_matrix(m: &InformationMatrix, k: &SelectionMatrix) -> Result<CMatrix> {
    if m.dim() != k.dim() {
        return param(format!(
            "selection has {} rows, information matrix dimension is {}",
            k.dim(),
            m.dim()
        ));
    }
    let pinv = generalized_inverse(m.matrix());
    let proj = m.matrix() * &pinv;
    let mut gap: f64 = 0.0;
    for &c in k.columns() {
        for i in 0..m.dim() {
            let e = if i == c { 1.0 } else { 0.0 };
            gap = gap.max((e - proj[(i, c)]).abs());
        }
    }
    if gap > ESTIMABILITY_TOL {
        return Err(Error::Infeasible(format!(
            "selected parameters are not estimable (‖(I − MM⁻)K‖ = {gap:.3e})"
        )));
    }
    let s = k.s();
    let a = DMatrix::from_fn(s, s, |i, j| pinv[(k.columns[i], k.columns[j])]);
    let sp = spectral(&a);
    let top = sp.values.iter().fold(0.0f64, |x, &y| x.max(y));
    if sp.values.iter().any(|&l| !(l > PINV_REL_TOL * top)) {
        return Err(Error::Infeasible("Kᵀ M⁻ K is singular".into()));
    }
    let mut order: Vec<usize> = (0..s).collect();
    // C has eigenvalues 1/λ(A); sort them ascending.
    order.sort_by(|&x, &y| sp.values[y].partial_cmp(&sp.values[x]).expect("finite"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| 1.0 / sp.values[i]).collect();
    let eigenvectors = DMatrix::from_fn(s, s, |r, c| sp.vectors[(r, order[c])]);
    let matrix = sp.compose(|l| 1.0 / l);
    Ok(CMatrix {
        matrix,
        eigenvalues,
        eigenvectors,
        pinv,
    })
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p >= 1.0 {
        return param(format!("p must lie in [-inf, 1), got {p}"));
    }
    Ok(())
}

/// Power mean of positive eigenvalues; `p = 0` and `p = -inf` are the analytic limits.
pub fn power_mean(eigenvalues: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    if eigenvalues.is_empty() {
        return param("power mean of an empty spectrum");
    }
    if eigenvalues.iter().any(|&l| l < 0.0) {
        return param("power mean needs nonnegative eigenvalues");
    }
    let s = eigenvalues.len() as f64;
    if p == f64::NEG_INFINITY {
        return Ok(eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
    }
    if eigenvalues.contains(&0.0) && p <= 0.0 {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok((eigenvalues.iter().map(|l| l.ln()).sum::<f64>() / s).exp());
    }
    Ok((eigenvalues.iter().map(|l| l.powf(p)).sum::<f64>() / s).powf(1.0 / p))
}

/// `Φ_p(C_K)`; an infeasible design scores `-inf`.
pub fn phi_p(m: &InformationMatrix, k: &SelectionMatrix, p: f64) -> Result<f64> {
    check_p(p)?;
    match c_matrix(m, k) {
        Ok(c) => power_mean(c.eigenvalues(), p),
        Err(Error::Infeasible(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Sum of the `s` smallest eigenvalues of `M`.
pub fn phi_es(m: &InformationMatrix, s: usize) -> Result<f64> {
    if s == 0 || s > m.dim() {
        return param(format!("s = {s} outside [1, {}]", m.dim()));
    }
    let ev = m.eigenvalues();
    Ok(ev[..s].iter().map(|&l| l.max(0.0)).sum())
}

/// A design criterion; larger values are better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    D,
    A,
    E,
    PhiP(f64),
    Es(usize),
}

impl Criterion {
    /// `p` of the `Φ_p` family, if this criterion belongs to it.
    pub fn p(&self) -> Option<f64> {
        match *self {
            Criterion::D => Some(0.0),
            Criterion::A => Some(-1.0),
            Criterion::E => Some(f64::NEG_INFINITY),
            Criterion::PhiP(p) => Some(p),
            Criterion::Es(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Criterion::PhiP(p) => check_p(p),
            Criterion::Es(0) => param("phi-es needs s >= 1"),
            _ => Ok(()),
        }
    }

    /// Criterion value. `Φ_p` uses `k`; `Φ_Es` ignores it.
    pub fn value(&self, m: &InformationMatrix, k: &SelectionMatrix) -> Result<f64> {
        self.validate()?;
        match *self {
            Criterion::Es(s) => phi_es(m, s),
            _ => phi_p(m, k, self.p().expect("phi_p family")),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::D => write!(f, "D"),
            Criterion::A => write!(f, "A"),
            Criterion::E => write!(f, "E"),
            Criterion::PhiP(p) => write!(f, "phi-p={p}"),
            Criterion::Es(s) => write!(f, "phi-es={s}"),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let c = match s.trim() {
            "D" | "d" => Criterion::D,
            "A" | "a" => Criterion::A,
            "E" | "e" => Criterion::E,
            other => {
                if let Some(v) = other.strip_prefix("phi-p=") {
                    let p = match v {
                        "-inf" | "-infinity" => f64::NEG_INFINITY,
                        _ => v
                            .parse()
                            .map_err(|_| Error::Parameter(format!("bad p value '{v}'")))?,
                    };
                    Criterion::PhiP(p)
                } else if let Some(v) = other.strip_prefix("phi-es=") {
                    Criterion::Es(
                        v.parse()
                            .map_err(|_| Error::Parameter(format!("bad s value '{v}'")))?,
                    )
                } else {
                    return param(format!(
                        "unknown criterion '{other}' (expected D, A, E, phi-p=<v>, phi-es=<s>)"
                    ));
                }
            }
        };
        c.validate()?;
        Ok(c)
    }
}

/// `Φ(design) / Φ(reference)`; an infeasible design has efficiency 0.
pub fn efficiency(
    design: &InformationMatrix,
    reference: &InformationMatrix,
    criterion: Criterion,
    k: &SelectionMatrix,
) -> Result<f64> {
    let den = criterion.value(reference, k)?;
    if !(den > 0.0) {
        return Err(Error::Infeasible(format!(
            "reference design scores {den} under {criterion}"
        )));
    }
    let num = criterion.value(design, k)?;
    if num == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Resolution of the equivalence-theorem scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivalenceGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Number of grid maxima refined locally.
    pub refine_top: usize,
}

impl Default for EquivalenceGrid {
    fn default() -> Self {
        Self {
            n_theta: 61,
            n_phi: 121,
            refine_top: 5,
        }
    }
}

impl EquivalenceGrid {
    pub fn with_resolution(n: usize) -> Self {
        Self {
            n_theta: n,
            n_phi: 2 * n - 1,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_theta < 2 || self.n_phi < 2 {
            return param("equivalence grid needs at least two points per axis");
        }
        Ok(())
    }
}

/// Outcome of an equivalence-theorem scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub max_directional: f64,
    pub bound: f64,
    pub pass: bool,
    pub argmax: AngleVector,
    pub points_evaluated: usize,
}

impl Certificate {
    /// `max / bound − 1`
    pub fn excess(&self) -> f64 {
        self.max_directional / self.bound - 1.0
    }
}

/// Quadratic form `f(x)ᵀ G f(x)` and the bound it must respect everywhere.
#[derive(Debug, Clone)]
pub struct DirectionalKernel {
    pub kernel: DMatrix<f64>,
    pub bound: f64,
}

/// `G = M⁻ K C^{p+1} Kᵀ M⁻`, bound `tr C^p`.
pub fn phi_p_kernel(
    m: &InformationMatrix,
    k: &SelectionMatrix,
    p: f64,
) -> Result<DirectionalKernel> {
    check_p(p)?;
    if p == f64::NEG_INFINITY {
        return param(
            "the scan certificate needs finite p; E-optimality requires a subgradient witness",
        );
    }
    let c = c_matrix(m, k)?;
    let cp1 = c.power(p + 1.0);
    let bound = c.eigenvalues().iter().map(|l| l.powf(p)).sum();
    let dim = m.dim();
    let s = k.s();
    // B = M⁻ K, the selected columns of the pseudo-inverse.
    let b = DMatrix::from_fn(dim, s, |i, j| c.pinv[(i, k.columns[j])]);
    let mut kernel = &b * cp1 * b.transpose();
    symmetrize(&mut kernel);
    Ok(DirectionalKernel { kernel, bound })
}

/// Witness `Γ = K Kᵀ`, bound the sum of the `s` smallest eigenvalues of `M`.
pub fn phi_es_kernel(m: &InformationMatrix, k: &SelectionMatrix) -> Result<DirectionalKernel> {
    if m.dim() != k.dim() {
        return param(format!(
            "selection has {} rows, information matrix dimension is {}",
            k.dim(),
            m.dim()
        ));
    }
    let mut kernel = DMatrix::zeros(m.dim(), m.dim());
    for &c in k.columns() {
        kernel[(c, c)] = 1.0;
    }
    Ok(DirectionalKernel {
        kernel,
        bound: phi_es(m, k.s())?,
    })
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

fn quad_form(g: &DMatrix<f64>, f: &[f64]) -> f64 {
    let n = f.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += g[(i, j)] * f[j];
        }
        total += f[i] * row;
    }
    total
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    index: usize,
}

fn keep_top(top: &mut Vec<Candidate>, cand: Candidate, n: usize) {
    if n == 0 {
        return;
    }
    let pos = top
        .iter()
        .position(|c| cand.value > c.value || (cand.value == c.value && cand.index < c.index))
        .unwrap_or(top.len());
    if pos < n {
        top.insert(pos, cand);
        top.truncate(n);
    }
}

/// Maximises `f(x)ᵀ G f(x)` over a tensor grid with local refinement.
pub fn scan_directional(
    basis: &HarmonicBasis,
    kernel: &DirectionalKernel,
    grid: EquivalenceGrid,
) -> Result<Certificate> {
    grid.validate()?;
    if kernel.kernel.nrows() != basis.dim() {
        return param("kernel dimension does not match the basis");
    }
    let n_axes = basis.m() as usize - 2;
    let pi = std::f64::consts::PI;
    let h_theta = pi / (grid.n_theta - 1) as f64;
    let h_phi = 2.0 * pi / (grid.n_phi - 1) as f64;
    let total = grid.n_theta.pow(n_axes as u32) * grid.n_phi;
    let decode = |mut idx: usize, thetas: &mut [f64]| -> f64 {
        let phi = -pi + (idx % grid.n_phi) as f64 * h_phi;
        idx /= grid.n_phi;
        for t in thetas.iter_mut().rev() {
            *t = (idx % grid.n_theta) as f64 * h_theta;
            idx /= grid.n_theta;
        }
        phi
    };
    let keep = grid.refine_top.max(1);
    let blocks = map_ranges(total, 4096, |range| {
        let mut scratch = BasisScratch::default();
        let mut f = vec![0.0; basis.dim()];
        let mut thetas = vec![0.0; n_axes];
        let mut top = Vec::with_capacity(keep + 1);
        for idx in range {
            let phi = decode(idx, &mut thetas);
            basis.eval_into(&thetas, phi, &mut scratch, &mut f);
            keep_top(
                &mut top,
                Candidate {
                    value: quad_form(&kernel.kernel, &f),
                    index: idx,
                },
                keep,
            );
        }
        top
    });
    let mut top = Vec::with_capacity(keep + 1);
    for block in blocks {
        for cand in block {
            keep_top(&mut top, cand, keep);
        }
    }
    let mut best = top[0];
    let mut best_point = {
        let mut thetas = vec![0.0; n_axes];
        let phi = decode(best.index, &mut thetas);
        AngleVector::new(thetas, phi)
    };
    let mut evaluated = total;

    // Local 7-point-per-axis grids at a third of the spacing.
    let offsets: Vec<f64> = (-3..=3).map(|k| k as f64 / 3.0).collect();
    let local = offsets.len().pow(n_axes as u32 + 1);
    let refined: Vec<(f64, AngleVector)> = top
        .iter()
        .take(grid.refine_top)
        .map(|cand| {
            let mut centre = vec![0.0; n_axes];
            let centre_phi = decode(cand.index, &mut centre);
            let mut scratch = BasisScratch::default();
            let mut f = vec![0.0; basis.dim()];
            let mut thetas = vec![0.0; n_axes];
            let mut best_local = (
                f64::NEG_INFINITY,
                AngleVector::new(centre.clone(), centre_phi),
            );
            for mut code in 0..local {
                let phi = (centre_phi + offsets[code % 7] * h_phi).clamp(-pi, pi);
                code /= 7;
                for a in (0..n_axes).rev() {
                    thetas[a] = (centre[a] + offsets[code % 7] * h_theta).clamp(0.0, pi);
                    code /= 7;
                }
                basis.eval_into(&thetas, phi, &mut scratch, &mut f);
                let v = quad_form(&kernel.kernel, &f);
                if v > best_local.0 {
                    best_local = (v, AngleVector::new(thetas.clone(), phi));
                }
            }
            best_local
        })
        .collect();
    for (v, point) in refined {
        evaluated += local;
        if v > best.value {
            best.value = v;
            best_point = point;
        }
    }
    Ok(Certificate {
        max_directional: best.value,
        bound: kernel.bound,
        pass: best.value <= kernel.bound * (1.0 + CERTIFICATE_SLACK),
        argmax: best_point,
        points_evaluated: evaluated,
    })
}

/// Equivalence-theorem check for `Φ_p` optimality of `design` (finite `p`).
pub fn equivalence_check_phi_p(
    design: &Design,
    basis: &HarmonicBasis,
    k: &SelectionMatrix,
    p: f64,
    grid: EquivalenceGrid,
) -> Result<Certificate> {
    let m = info_matrix(design, basis)?;
    scan_directional(basis, &phi_p_kernel(&m, k, p)?, grid)
}

/// Equivalence-theorem check for `Φ_Es` optimality with `s` = number of selected coefficients.
pub fn equivalence_check_phi_es(
    design: &Design,
    basis: &HarmonicBasis,
    k: &SelectionMatrix,
    grid: EquivalenceGrid,
) -> Result<Certificate> {
    let m = info_matrix(design, basis)?;
    scan_directional(basis, &phi_es_kernel(&m, k)?, grid)
}
