//! Symmetrized hyperspherical harmonics on `S_4` for crystallographic point
//! groups, their regression models, and a D-optimal reference search.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::criteria::{scan_directional, Certificate, DirectionalKernel, EquivalenceGrid};
use crate::design::{
    info_matrix, omega_tilde, optimal_product_design, Design, InformationMatrix, SupportPointDesign,
};
use crate::error::{param, Error, Result};
use crate::harmonics::{AngleVector, BasisScratch, BasisSpec, HarmonicBasis, MultiIndex};
use crate::parallel::{map_chunks, DEFAULT_CHUNK};
use crate::special::compensated_sum;

const ROW_TOL: f64 = 1e-12;

/// Point groups with shipped coefficient tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointGroup {
    PG1,
    PG2,
}

impl PointGroup {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            1 => Ok(PointGroup::PG1),
            2 => Ok(PointGroup::PG2),
            _ => param(format!(
                "no built-in table for point group {n} (available: 1, 2)"
            )),
        }
    }

    pub fn number(&self) -> u32 {
        match self {
            PointGroup::PG1 => 1,
            PointGroup::PG2 => 2,
        }
    }
}

/// `sign · √(num/den)` times the harmonic `Y_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub index: MultiIndex,
    pub sign: i8,
    pub num: u64,
    pub den: u64,
}

impl Term {
    pub fn new(lambda: u32, mu1: u32, mu2: i32, sign: i8, num: u64, den: u64) -> Self {
        Self {
            index: MultiIndex::new(lambda, vec![mu1], mu2),
            sign,
            num,
            den,
        }
    }

    pub fn value(&self) -> f64 {
        f64::from(self.sign) * (self.num as f64 / self.den as f64).sqrt()
    }
}

/// One symmetrized harmonic `Z_λ^η`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetrizedRow {
    pub lambda: u32,
    pub eta: u32,
    pub terms: Vec<Term>,
}

impl SymmetrizedRow {
    pub fn label(&self) -> String {
        format!("Z_{}^{}", self.lambda, self.eta)
    }

    fn norm_sq(&self) -> f64 {
        compensated_sum(self.terms.iter().map(|t| t.value() * t.value()))
    }

    fn dot(&self, other: &SymmetrizedRow) -> f64 {
        compensated_sum(self.terms.iter().flat_map(|a| {
            other
                .terms
                .iter()
                .filter(move |b| b.index == a.index)
                .map(move |b| a.value() * b.value())
        }))
    }
}

/// Coefficient rows for one point group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizedBasisTable {
    pub group: u32,
    pub rows: Vec<SymmetrizedRow>,
}

/// Worst deviations from row orthonormality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrthonormalityReport {
    pub max_norm_error: f64,
    pub max_cross_product: f64,
}

impl SymmetrizedBasisTable {
    pub fn new(group: u32, rows: Vec<SymmetrizedRow>) -> Result<Self> {
        if rows.is_empty() {
            return param(format!("table for group {group} has no rows"));
        }
        for row in &rows {
            if row.terms.is_empty() {
                return param(format!("{} has no terms", row.label()));
            }
            for t in &row.terms {
                t.index.validate(4)?;
                if t.index.lambda != row.lambda {
                    return param(format!(
                        "{} references {} of another level",
                        row.label(),
                        t.index
                    ));
                }
                if t.den == 0 || !(t.sign == 1 || t.sign == -1) {
                    return param(format!(
                        "{}: coefficient needs sign ±1 and positive denominator",
                        row.label()
                    ));
                }
            }
        }
        let table = Self { group, rows };
        let rep = table.orthonormality();
        if rep.max_norm_error > ROW_TOL || rep.max_cross_product > ROW_TOL {
            return param(format!(
                "group {group} rows are not orthonormal (norm error {:.2e}, cross product {:.2e})",
                rep.max_norm_error, rep.max_cross_product
            ));
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_lambda(&self) -> u32 {
        self.rows.iter().map(|r| r.lambda).max().unwrap_or(0)
    }

    pub fn orthonormality(&self) -> OrthonormalityReport {
        let mut max_norm_error: f64 = 0.0;
        let mut max_cross_product: f64 = 0.0;
        for (i, a) in self.rows.iter().enumerate() {
            max_norm_error = max_norm_error.max((a.norm_sq() - 1.0).abs());
            for b in &self.rows[..i] {
                if a.lambda == b.lambda {
                    max_cross_product = max_cross_product.max(a.dot(b).abs());
                }
            }
        }
        OrthonormalityReport {
            max_norm_error,
            max_cross_product,
        }
    }

    /// Coordinate-wise `k × D` matrix `T` in the canonical order of `basis`.
    pub fn coefficient_matrix(&self, basis: &HarmonicBasis) -> Result<DMatrix<f64>> {
        let mut t = DMatrix::zeros(self.rows.len(), basis.dim());
        for (i, row) in self.rows.iter().enumerate() {
            for term in &row.terms {
                let j = basis.position(&term.index).ok_or_else(|| {
                    Error::Parameter(format!("{} is not in the harmonic basis", term.index))
                })?;
                t[(i, j)] += term.value();
            }
        }
        Ok(t)
    }

    /// Reads coefficient rows from CSV with columns
    /// `group,eta,lambda,mu1,mu2,coeff_num,coeff_den,sign`. Returns one table per group.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Vec<Self>> {
        #[derive(Deserialize)]
        struct Record {
            group: u32,
            eta: u32,
            lambda: u32,
            mu1: u32,
            mu2: i32,
            coeff_num: u64,
            coeff_den: u64,
            sign: i8,
        }
        let mut grouped: BTreeMap<u32, BTreeMap<(u32, u32), Vec<Term>>> = BTreeMap::new();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        for rec in rdr.deserialize() {
            let r: Record = rec?;
            grouped
                .entry(r.group)
                .or_default()
                .entry((r.lambda, r.eta))
                .or_default()
                .push(Term::new(
                    r.lambda,
                    r.mu1,
                    r.mu2,
                    r.sign,
                    r.coeff_num,
                    r.coeff_den,
                ));
        }
        grouped
            .into_iter()
            .map(|(group, rows)| {
                let rows = rows
                    .into_iter()
                    .map(|((lambda, eta), terms)| SymmetrizedRow { lambda, eta, terms })
                    .collect();
                Self::new(group, rows)
            })
            .collect()
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Vec<Self>> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Writes the table in the CSV layout read by [`Self::from_csv_reader`].
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            "group",
            "eta",
            "lambda",
            "mu1",
            "mu2",
            "coeff_num",
            "coeff_den",
            "sign",
        ])?;
        for row in &self.rows {
            for t in &row.terms {
                w.write_record([
                    self.group.to_string(),
                    row.eta.to_string(),
                    row.lambda.to_string(),
                    t.index.chain[0].to_string(),
                    t.index.last.to_string(),
                    t.num.to_string(),
                    t.den.to_string(),
                    t.sign.to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("ascii csv"))
    }
}

fn row(lambda: u32, eta: u32, terms: &[(u32, i32, i8, u64, u64)]) -> SymmetrizedRow {
    SymmetrizedRow {
        lambda,
        eta,
        terms: terms
            .iter()
            .map(|&(mu1, mu2, sign, num, den)| Term::new(lambda, mu1, mu2, sign, num, den))
            .collect(),
    }
}

fn pg1_rows() -> Vec<SymmetrizedRow> {
    vec![
        row(0, 1, &[(0, 0, 1, 1, 1)]),
        row(4, 1, &[(0, 0, 1, 2, 5), (4, 0, 1, 7, 20), (4, 4, 1, 1, 4)]),
        row(
            4,
            2,
            &[(1, 0, 1, 2, 5), (3, 0, -1, 1, 10), (4, -4, -1, 1, 2)],
        ),
        row(
            4,
            3,
            &[
                (1, 1, 1, 2, 5),
                (3, 1, 1, 3, 80),
                (3, 3, -1, 1, 16),
                (4, -1, 1, 7, 16),
                (4, -3, 1, 1, 16),
            ],
        ),
        row(
            4,
            4,
            &[
                (1, -1, 1, 2, 5),
                (3, -1, 1, 3, 80),
                (3, -3, 1, 1, 16),
                (4, 1, -1, 7, 16),
                (4, 3, 1, 1, 16),
            ],
        ),
        row(4, 5, &[(2, 0, 1, 4, 7), (4, 0, 1, 5, 28), (4, 4, -1, 1, 4)]),
        row(
            4,
            6,
            &[
                (2, 1, 1, 2, 7),
                (3, -1, -1, 5, 16),
                (3, -3, 1, 3, 16),
                (4, 1, 1, 3, 112),
                (4, 3, 1, 3, 16),
            ],
        ),
        row(
            4,
            7,
            &[
                (2, -1, 1, 2, 7),
                (3, 1, 1, 5, 16),
                (3, 3, 1, 3, 16),
                (4, -1, 1, 3, 112),
                (4, -3, -1, 3, 16),
            ],
        ),
        row(4, 8, &[(2, 2, 1, 4, 7), (4, 2, -1, 3, 7)]),
        row(
            4,
            9,
            &[(2, -2, 1, 2, 7), (3, 2, -1, 1, 2), (4, -2, -1, 3, 14)],
        ),
        row(4, 10, &[(3, -2, 1, 1, 1)]),
    ]
}

/// Shipped coefficient table (`λ ≤ 4`).
pub fn builtin_table(group: PointGroup) -> SymmetrizedBasisTable {
    let rows = match group {
        PointGroup::PG1 => pg1_rows(),
        PointGroup::PG2 => pg1_rows()
            .into_iter()
            .filter(|r| r.lambda == 0 || [1, 2, 5, 8, 9, 10].contains(&r.eta))
            .collect(),
    };
    SymmetrizedBasisTable::new(group.number(), rows).expect("built-in tables are orthonormal")
}

/// Regression model whose regressors are the rows of a symmetrized table.
#[derive(Debug, Clone)]
pub struct SymmetrizedModel {
    table: SymmetrizedBasisTable,
    basis: HarmonicBasis,
    transform: DMatrix<f64>,
}

impl SymmetrizedModel {
    pub fn new(table: SymmetrizedBasisTable) -> Result<Self> {
        let basis = HarmonicBasis::new(&BasisSpec::new(4, table.max_lambda())?)?;
        let transform = table.coefficient_matrix(&basis)?;
        Ok(Self {
            table,
            basis,
            transform,
        })
    }

    pub fn builtin(group: PointGroup) -> Self {
        Self::new(builtin_table(group)).expect("built-in model")
    }

    pub fn table(&self) -> &SymmetrizedBasisTable {
        &self.table
    }

    pub fn basis(&self) -> &HarmonicBasis {
        &self.basis
    }

    /// `T`, mapping the harmonic vector to the symmetrized one.
    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn dim(&self) -> usize {
        self.transform.nrows()
    }

    fn eval_into(
        &self,
        thetas: &[f64],
        phi: f64,
        scratch: &mut BasisScratch,
        f: &mut [f64],
        out: &mut [f64],
    ) {
        self.basis.eval_into(thetas, phi, scratch, f);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .transform
                .row(i)
                .iter()
                .zip(f.iter())
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

/// `(Z_1, …, Z_k)` at one hyperangle on `S_4`.
pub fn eval_symmetrized(model: &SymmetrizedModel, ang: &AngleVector) -> Result<Vec<f64>> {
    ang.validate(4)?;
    let mut f = vec![0.0; model.basis.dim()];
    let mut out = vec![0.0; model.dim()];
    model.eval_into(
        &ang.thetas,
        ang.phi,
        &mut BasisScratch::default(),
        &mut f,
        &mut out,
    );
    Ok(out)
}

/// `T M(ξ) Tᵀ`
pub fn symmetrized_info(model: &SymmetrizedModel, design: &Design) -> Result<InformationMatrix> {
    if design.m() != 4 {
        return param(format!(
            "symmetrized models live on S_4, design is on S_{}",
            design.m()
        ));
    }
    info_matrix(design, &model.basis)?.transform(&model.transform)
}

/// `∫ Z_a Z_b dΩ`, computed with an exact product rule of one order above the model.
pub fn functional_gram(model: &SymmetrizedModel) -> Result<DMatrix<f64>> {
    let d = model.table.max_lambda() + 1;
    let rule: Design = optimal_product_design(4, d, d + 1, 2 * d + 1, -PI)?.into();
    let basis = HarmonicBasis::new(&BasisSpec::new(4, d)?)?;
    let mut t = DMatrix::zeros(model.dim(), basis.dim());
    for (j, idx) in model.basis.indices().iter().enumerate() {
        let target = basis.position(idx).expect("nested bases");
        for i in 0..model.dim() {
            t[(i, target)] = model.transform[(i, j)];
        }
    }
    let m = info_matrix(&rule, &basis)?.transform(&t)?;
    Ok(m.into_matrix() * omega_tilde(4)?)
}

/// Finite candidate set for the weight optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    points: Vec<AngleVector>,
}

impl CandidateGrid {
    pub fn new(points: Vec<AngleVector>) -> Result<Self> {
        if points.is_empty() {
            return param("candidate grid is empty");
        }
        for p in &points {
            p.validate(4)?;
        }
        Ok(Self { points })
    }

    /// Chebyshev-spaced polar angles `π(1 − cos(π(i+½)/n))/2` and `n_phi`
    /// equispaced azimuths starting at `-π`.
    pub fn chebyshev(n_theta1: usize, n_theta2: usize, n_phi: usize) -> Result<Self> {
        if n_theta1 == 0 || n_theta2 == 0 || n_phi == 0 {
            return param("candidate grid sizes must be positive");
        }
        let cheb = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| PI * (1.0 - (PI * (i as f64 + 0.5) / n as f64).cos()) / 2.0)
                .collect()
        };
        let phis: Vec<f64> = (0..n_phi)
            .map(|j| -PI + 2.0 * PI * j as f64 / n_phi as f64)
            .collect();
        let mut points = Vec::with_capacity(n_theta1 * n_theta2 * n_phi);
        for &a in &cheb(n_theta1) {
            for &b in &cheb(n_theta2) {
                for &phi in &phis {
                    points.push(AngleVector::new(vec![a, b], phi));
                }
            }
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[AngleVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for CandidateGrid {
    fn default() -> Self {
        Self::chebyshev(25, 25, 24).expect("default grid")
    }
}

/// Kiefer–Wolfowitz summary: `max d(x) / k − 1` over the candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KwCertificate {
    pub max_variance: f64,
    pub dim: usize,
    pub gap: f64,
    pub iterations: usize,
}

/// Output of [`d_optimal_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct DOptimalResult {
    pub design: SupportPointDesign,
    /// `det(M)^{1/k}`
    pub d_value: f64,
    pub certificate: KwCertificate,
    /// Log-determinant after each iteration.
    pub log_det_trace: Vec<f64>,
}

struct Moments {
    chol: Cholesky<f64, nalgebra::Dyn>,
    log_det: f64,
}

fn moments(g: &[Vec<f64>], w: &[f64], active: &[usize], k: usize) -> Result<Moments> {
    let mut m = DMatrix::zeros(k, k);
    for &i in active {
        let gi = DVector::from_column_slice(&g[i]);
        m.ger(w[i], &gi, &gi, 1.0);
    }
    let chol = Cholesky::new(m)
        .ok_or_else(|| Error::Infeasible("information matrix became singular".into()))?;
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|x| x.ln())
            .sum::<f64>();
    Ok(Moments { chol, log_det })
}

fn variances(g: &[Vec<f64>], chol: &Cholesky<f64, nalgebra::Dyn>, active: &[usize]) -> Vec<f64> {
    let l = chol.l();
    map_chunks(active, DEFAULT_CHUNK * 4, |chunk| {
        chunk
            .iter()
            .map(|&i| {
                let y = l
                    .solve_lower_triangular(&DVector::from_column_slice(&g[i]))
                    .expect("nonsingular factor");
                y.norm_squared()
            })
            .collect::<Vec<f64>>()
    })
    .concat()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad(minv: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let k = a.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut row = 0.0;
        for j in 0..k {
            row += minv[(i, j)] * b[j];
        }
        total += a[i] * row;
    }
    total
}

/// `M⁻¹ ← (M + c·g gᵀ)⁻¹`
fn sherman_morrison(minv: &mut DMatrix<f64>, g: &[f64], c: f64) {
    let u = &*minv * DVector::from_column_slice(g);
    let denom = 1.0 + c * dot(g, u.as_slice());
    minv.ger(-c / denom, &u, &u, 1.0);
}

/// Pairwise mass transfers with the exact line-search step, moving weight
/// from low-variance support points to the highest-variance candidates.
fn exchange_pass(
    g: &[Vec<f64>],
    w: &mut [f64],
    minv: &mut DMatrix<f64>,
    active: &[usize],
    d: &[f64],
) {
    let mut support: Vec<usize> = (0..active.len()).filter(|&p| w[active[p]] > 0.0).collect();
    support.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite").then(a.cmp(&b)));
    let mut top: Vec<usize> = (0..active.len()).collect();
    let width = support.len().clamp(1, top.len());
    top.select_nth_unstable_by(width - 1, |&a, &b| {
        d[b].partial_cmp(&d[a]).expect("finite").then(a.cmp(&b))
    });
    top.truncate(width);
    top.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).expect("finite").then(a.cmp(&b)));
    for (n, &pu) in support.iter().enumerate() {
        let (u, v) = (active[pu], active[top[n % top.len()]]);
        if u == v {
            continue;
        }
        let du = quad(minv, &g[u], &g[u]);
        let dv = quad(minv, &g[v], &g[v]);
        let duv = quad(minv, &g[u], &g[v]);
        let curvature = du * dv - duv * duv;
        if !(curvature > 1e-14 * du * dv) {
            continue;
        }
        let alpha = ((dv - du) / (2.0 * curvature)).clamp(-w[v], w[u]);
        if alpha == 0.0 {
            continue;
        }
        w[u] -= alpha;
        w[v] += alpha;
        sherman_morrison(minv, &g[v], alpha);
        sherman_morrison(minv, &g[u], -alpha);
    }
}

/// D-optimal weights on `grid`.
///
/// Each iteration applies a multiplicative update `w_i ← w_i d(x_i)/k`
/// followed by a pass of optimal-step vertex exchanges, and drops
/// candidates that the Harman–Pronzato bound excludes from every optimal
/// support. Stops once `max d(x)/k − 1 ≤ tol`.
pub fn d_optimal_search(
    model: &SymmetrizedModel,
    grid: &CandidateGrid,
    max_iter: usize,
    tol: f64,
) -> Result<DOptimalResult> {
    if !(tol > 0.0) {
        return param("tolerance must be positive");
    }
    let k = model.dim();
    let kf = k as f64;
    let g: Vec<Vec<f64>> = map_chunks(grid.points(), DEFAULT_CHUNK, |chunk| {
        let mut scratch = BasisScratch::default();
        let mut f = vec![0.0; model.basis.dim()];
        chunk
            .iter()
            .map(|p| {
                let mut out = vec![0.0; k];
                model.eval_into(&p.thetas, p.phi, &mut scratch, &mut f, &mut out);
                out
            })
            .collect::<Vec<_>>()
    })
    .concat();
    let n = g.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    loop {
        let mom = moments(&g, &w, &active, k)?;
        trace.push(mom.log_det);
        let d = variances(&g, &mom.chol, &active);
        let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = dmax / kf - 1.0;
        let finished = gap <= tol;
        if finished || iterations >= max_iter {
            let support: Vec<usize> = active.iter().copied().filter(|&i| w[i] > 1e-12).collect();
            let total = compensated_sum(support.iter().map(|&i| w[i]));
            let design = SupportPointDesign::new(
                support.iter().map(|&i| grid.points()[i].clone()).collect(),
                support.iter().map(|&i| w[i] / total).collect(),
            )?;
            let result = DOptimalResult {
                design,
                d_value: (mom.log_det / kf).exp(),
                certificate: KwCertificate {
                    max_variance: dmax,
                    dim: k,
                    gap,
                    iterations,
                },
                log_det_trace: trace,
            };
            return if finished {
                Ok(result)
            } else {
                Err(Error::NotConverged(Box::new(result)))
            };
        }
        // Points with d below this level are outside every D-optimal support.
        let eps = gap.max(0.0);
        let threshold =
            kf * (1.0 + eps / 2.0 - (eps * (4.0 + eps - 4.0 / kf)).max(0.0).sqrt() / 2.0);
        let mut kept = Vec::with_capacity(active.len());
        let mut kept_d = Vec::with_capacity(active.len());
        for (pos, &i) in active.iter().enumerate() {
            if d[pos] >= threshold {
                w[i] *= d[pos] / kf;
                kept.push(i);
                kept_d.push(d[pos]);
            } else {
                w[i] = 0.0;
            }
        }
        let total = compensated_sum(kept.iter().map(|&i| w[i]));
        for &i in &kept {
            w[i] /= total;
        }
        active = kept;
        let mut minv = moments(&g, &w, &active, k)?.chol.inverse();
        exchange_pass(&g, &mut w, &mut minv, &active, &kept_d);
        for &i in &active {
            w[i] = w[i].max(0.0);
        }
        iterations += 1;
    }
}

/// `det(T M(ξ) Tᵀ)^{1/k}`
pub fn d_value(model: &SymmetrizedModel, design: &Design) -> Result<f64> {
    let m = symmetrized_info(model, design)?;
    let chol = Cholesky::new(m.into_matrix())
        .ok_or_else(|| Error::Infeasible("singular symmetrized information".into()))?;
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|x| x.ln())
            .sum::<f64>();
    Ok((log_det / model.dim() as f64).exp())
}

/// D-efficiency of `design` relative to a reference D-value.
pub fn d_efficiency(model: &SymmetrizedModel, design: &Design, reference: f64) -> Result<f64> {
    Ok(d_value(model, design)? / reference)
}

/// Equivalence-theorem scan of `f_symᵀ M_sym⁻¹ f_sym ≤ k` over the hyperangle domain.
pub fn kw_certificate(
    model: &SymmetrizedModel,
    design: &Design,
    grid: EquivalenceGrid,
) -> Result<Certificate> {
    let m = symmetrized_info(model, design)?;
    let inv = m
        .matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Infeasible("singular symmetrized information".into()))?;
    let kernel = model.transform.transpose() * inv * &model.transform;
    scan_directional(
        &model.basis,
        &DirectionalKernel {
            kernel,
            bound: model.dim() as f64,
        },
        grid,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::comparison_designs_example1;
    use approx::assert_relative_eq;

    #[test]
    fn table_shapes() {
        let pg1 = builtin_table(PointGroup::PG1);
        let pg2 = builtin_table(PointGroup::PG2);
        assert_eq!(pg1.len(), 11);
        assert_eq!(pg2.len(), 7);
        let z10 = &pg1.rows[10];
        assert_eq!(z10.terms, vec![Term::new(4, 3, -2, 1, 1, 1)]);
        assert_eq!(z10.terms[0].value(), 1.0);
        let z1 = &pg1.rows[1];
        assert_relative_eq!(z1.norm_sq(), 2.0 / 5.0 + 7.0 / 20.0 + 0.25, epsilon = 1e-15);
        let rep = pg1.orthonormality();
        assert!(rep.max_norm_error <= 1e-12 && rep.max_cross_product <= 1e-12);
        let labels: Vec<String> = pg2.rows.iter().map(|r| r.label()).collect();
        assert_eq!(
            labels,
            ["Z_0^1", "Z_4^1", "Z_4^2", "Z_4^5", "Z_4^8", "Z_4^9", "Z_4^10"]
        );
    }

    #[test]
    fn z3_and_z7_are_orthogonal_by_hand() {
        // √(3/80)·√(5/16) + (−√(1/16))·√(3/16) + √(7/16)·√(3/112) + √(1/16)·(−√(3/16))
        let by_hand = (15.0f64 / 1280.0).sqrt() - 3f64.sqrt() / 16.0 + (21.0f64 / 1792.0).sqrt()
            - 3f64.sqrt() / 16.0;
        assert!(by_hand.abs() < 1e-15);
        let pg1 = builtin_table(PointGroup::PG1);
        assert!(pg1.rows[3].dot(&pg1.rows[7]).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_orthonormal_rows() {
        let mut rows = pg1_rows();
        rows[2].terms[0].num = 3;
        assert!(SymmetrizedBasisTable::new(1, rows).is_err());
    }

    #[test]
    fn evaluation_matches_transform() {
        let model = SymmetrizedModel::builtin(PointGroup::PG1);
        let ang = AngleVector::new(vec![0.9, 2.1], -0.4);
        let z = eval_symmetrized(&model, &ang).unwrap();
        assert_relative_eq!(z[0], 1.0 / (2.0 * PI * PI).sqrt(), epsilon = 1e-14);
        let f = DVector::from_vec(model.basis().eval(&ang).unwrap());
        let tf = model.transform() * f;
        for i in 0..11 {
            assert_relative_eq!(z[i], tf[i], epsilon = 1e-14);
        }
        let pg2 = SymmetrizedModel::builtin(PointGroup::PG2);
        let z2 = eval_symmetrized(&pg2, &ang).unwrap();
        for (i, &j) in [0usize, 1, 2, 5, 8, 9, 10].iter().enumerate() {
            assert_eq!(z2[i], z[j]);
        }
    }

    #[test]
    fn optimal_design_gives_scaled_identity() {
        let design: Design = optimal_product_design(4, 4, 5, 9, -PI).unwrap().into();
        for group in [PointGroup::PG1, PointGroup::PG2] {
            let model = SymmetrizedModel::builtin(group);
            let m = symmetrized_info(&model, &design).unwrap();
            assert!(m.identity_residual(1.0 / (2.0 * PI * PI)) <= 1e-10);
            let gram = functional_gram(&model).unwrap();
            let k = model.dim();
            assert!(
                InformationMatrix::from_matrix(gram)
                    .unwrap()
                    .identity_residual(1.0)
                    <= 1e-10 * k as f64
            );
        }
        let single: Design =
            SupportPointDesign::new(vec![AngleVector::new(vec![1.0, 1.0], 0.5)], vec![1.0])
                .unwrap()
                .into();
        let m = symmetrized_info(&SymmetrizedModel::builtin(PointGroup::PG1), &single).unwrap();
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let pg1 = builtin_table(PointGroup::PG1);
        let text = pg1.to_csv().unwrap();
        assert!(text.starts_with("group,eta,lambda,mu1,mu2,coeff_num,coeff_den,sign\n"));
        let tables = SymmetrizedBasisTable::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(tables.len(), 1);
        assert_eq!(tables[0], pg1);
        let bad = "group,eta,lambda,mu1,mu2,coeff_num,coeff_den,sign\n3,1,4,0,0,1,2,1\n";
        assert!(SymmetrizedBasisTable::from_csv_reader(bad.as_bytes()).is_err());
    }

    #[test]
    fn search_on_small_grid_is_monotone_and_certified() {
        let model = SymmetrizedModel::builtin(PointGroup::PG2);
        let grid = CandidateGrid::chebyshev(9, 9, 8).unwrap();
        let res = d_optimal_search(&model, &grid, 100_000, 1e-4).unwrap();
        assert!(res.certificate.gap <= 1e-4);
        for w in res.log_det_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        let (grid_design, _) = comparison_designs_example1();
        let eff = d_efficiency(&model, &grid_design.into(), res.d_value).unwrap();
        assert!(eff > 0.0 && eff < 1.0);
        match d_optimal_search(&model, &grid, 2, 1e-12) {
            Err(Error::NotConverged(best)) => assert_eq!(best.certificate.iterations, 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
