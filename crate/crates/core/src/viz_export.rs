//! Disk projection of `S_4` hyperangles and plot-ready texture-map tables.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::harmonics::{
    eval_harmonic, AngleVector, BasisScratch, BasisSpec, HarmonicBasis, MultiIndex,
};
use crate::parallel::map_ranges;
use crate::symmetry::{eval_symmetrized, SymmetrizedModel};

pub const TEXTURE_HEADER: &str = "slice_theta1,theta2,phi,x1,x2,value";

/// Radius `R(θ_1, θ_2)` of the disk projection.
pub fn disk_radius(theta1: f64, theta2: f64) -> f64 {
    let core = (theta1 - theta1.sin() * theta1.cos()).max(0.0);
    1.5f64.cbrt() * core.cbrt() * (2.0 * (1.0 - theta2.cos().abs())).max(0.0).sqrt()
}

fn exact_sin(phi: f64) -> f64 {
    if phi == 0.0 || phi.abs() == PI {
        0.0
    } else {
        phi.sin()
    }
}

fn exact_cos(phi: f64) -> f64 {
    if phi.abs() == PI {
        -1.0
    } else {
        phi.cos()
    }
}

/// `(R cos φ, R sin φ)`; `x2` is exactly zero at `φ ∈ {0, ±π}`.
pub fn disk_projection(theta1: f64, theta2: f64, phi: f64) -> Result<(f64, f64)> {
    if !(0.0..=PI).contains(&theta1) || !(0.0..=PI).contains(&theta2) {
        return param(format!("polar angles ({theta1}, {theta2}) outside [0, π]"));
    }
    if !(-PI..=PI).contains(&phi) {
        return param(format!("azimuth {phi} outside [-π, π]"));
    }
    let r = disk_radius(theta1, theta2);
    Ok((r * exact_cos(phi), r * exact_sin(phi)))
}

/// One sample of a texture map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskPoint {
    pub slice_theta1: f64,
    pub theta2: f64,
    pub phi: f64,
    pub x1: f64,
    pub x2: f64,
    pub value: f64,
}

/// Function drawn on the disk.
#[derive(Debug, Clone, Copy)]
pub enum TextureFunction<'a> {
    /// Row `row` (0-based) of a symmetrized model.
    Symmetrized {
        model: &'a SymmetrizedModel,
        row: usize,
    },
    /// A single harmonic on `S_4`.
    Harmonic(&'a MultiIndex),
}

/// Samples along `θ_2 ∈ [0, π/2]` and `φ ∈ [-π, π]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextureGrid {
    pub n_theta2: usize,
    pub n_phi: usize,
}

impl Default for TextureGrid {
    fn default() -> Self {
        Self {
            n_theta2: 31,
            n_phi: 61,
        }
    }
}

/// `θ_1 = (2k−1)π/48` for `k = 1..=6`.
pub fn default_slices() -> Vec<f64> {
    (1..=6).map(|k| (2 * k - 1) as f64 * PI / 48.0).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Samples `function` on every slice, ordered by slice, then `θ_2`, then `φ`.
pub fn texture_map(
    function: TextureFunction<'_>,
    slices: &[f64],
    grid: TextureGrid,
) -> Result<Vec<DiskPoint>> {
    if grid.n_theta2 == 0 || grid.n_phi == 0 {
        return param("texture grid needs at least one point per axis");
    }
    if let Some(bad) = slices.iter().find(|s| !(0.0..=PI).contains(*s)) {
        return param(format!("slice θ1 = {bad} outside [0, π]"));
    }
    let (basis, weights): (HarmonicBasis, Vec<f64>) = match function {
        TextureFunction::Symmetrized { model, row } => {
            if row >= model.dim() {
                return param(format!(
                    "row {row} out of range for a model with {} functions",
                    model.dim()
                ));
            }
            (
                model.basis().clone(),
                model.transform().row(row).iter().copied().collect(),
            )
        }
        TextureFunction::Harmonic(idx) => {
            idx.validate(4)?;
            let basis = HarmonicBasis::new(&BasisSpec::new(4, idx.lambda)?)?;
            let mut w = vec![0.0; basis.dim()];
            w[basis.position(idx).expect("index within its own level")] = 1.0;
            (basis, w)
        }
    };
    let theta2s = linspace(0.0, PI / 2.0, grid.n_theta2);
    let phis = linspace(-PI, PI, grid.n_phi);
    let rows = slices.len() * theta2s.len();
    let blocks = map_ranges(rows, 8, |range| {
        let mut scratch = BasisScratch::default();
        let mut f = vec![0.0; basis.dim()];
        let mut out = Vec::with_capacity(range.len() * phis.len());
        for r in range {
            let t1 = slices[r / theta2s.len()];
            let t2 = theta2s[r % theta2s.len()];
            for &phi in &phis {
                basis.eval_into(&[t1, t2], phi, &mut scratch, &mut f);
                let value = weights.iter().zip(&f).map(|(a, b)| a * b).sum();
                let (x1, x2) = disk_projection(t1, t2, phi).expect("grid inside the domain");
                out.push(DiskPoint {
                    slice_theta1: t1,
                    theta2: t2,
                    phi,
                    x1,
                    x2,
                    value,
                });
            }
        }
        out
    });
    Ok(blocks.concat())
}

/// Shortest round-trip decimal form, without a sign on zero.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:?}")
    }
}

/// Writes the fixed-header CSV with LF line endings.
pub fn write_texture_csv<W: Write>(mut out: W, points: &[DiskPoint]) -> Result<()> {
    writeln!(out, "{TEXTURE_HEADER}")?;
    for p in points {
        let fields = [p.slice_theta1, p.theta2, p.phi, p.x1, p.x2, p.value].map(format_float);
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Evaluates the texture function at one hyperangle.
pub fn texture_value(function: TextureFunction<'_>, ang: &AngleVector) -> Result<f64> {
    ang.validate(4)?;
    match function {
        TextureFunction::Symmetrized { model, row } => {
            let z = eval_symmetrized(model, ang)?;
            z.get(row)
                .copied()
                .ok_or_else(|| Error::Parameter(format!("row {row} out of range")))
        }
        TextureFunction::Harmonic(idx) => eval_harmonic(4, idx, ang),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::PointGroup;

    #[test]
    fn projection_examples() {
        let (x1, x2) = disk_projection(11.0 * PI / 48.0, PI / 4.0, PI).unwrap();
        assert!((x1 + 0.5323).abs() < 1e-3, "{x1}");
        assert_eq!(x2, 0.0);
        assert_eq!(disk_projection(1.0, 0.0, 0.7).unwrap(), (0.0, 0.0));
        let (x1, x2) = disk_projection(1.0, 1.0, 0.0).unwrap();
        assert_eq!(x2, 0.0);
        assert_eq!(x1, disk_radius(1.0, 1.0));
        assert_eq!(disk_projection(1.0, 1.0, -PI).unwrap().1, 0.0);
        assert!(disk_projection(4.0, 1.0, 0.0).is_err());
        assert!(disk_projection(1.0, 1.0, 3.5).is_err());
    }

    #[test]
    fn radius_properties() {
        for j in 0..=20 {
            let t2 = PI * j as f64 / 20.0;
            let mut prev = -1.0;
            for i in 0..=200 {
                let t1 = PI * i as f64 / 200.0;
                let r = disk_radius(t1, t2);
                assert!(r >= prev);
                prev = r;
                let (x1, x2) = disk_projection(t1, t2, 0.3 * i as f64 / 200.0 - 0.1).unwrap();
                assert!((x1 * x1 + x2 * x2 - r * r).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn texture_values_match_model() {
        let model = SymmetrizedModel::builtin(PointGroup::PG1);
        let f = TextureFunction::Symmetrized {
            model: &model,
            row: 2,
        };
        let pts = texture_map(
            f,
            &default_slices(),
            TextureGrid {
                n_theta2: 5,
                n_phi: 9,
            },
        )
        .unwrap();
        assert_eq!(pts.len(), 6 * 5 * 9);
        let target = pts
            .iter()
            .find(|p| {
                p.slice_theta1 == 11.0 * PI / 48.0
                    && (p.theta2 - PI / 4.0).abs() < 1e-15
                    && p.phi == PI
            })
            .unwrap();
        let z = eval_symmetrized(
            &model,
            &AngleVector::new(vec![11.0 * PI / 48.0, target.theta2], PI),
        )
        .unwrap();
        assert!((target.value - z[2]).abs() < 1e-14);
        assert_eq!(target.x2, 0.0);
        assert!(
            (texture_value(f, &AngleVector::new(vec![11.0 * PI / 48.0, PI / 4.0], PI)).unwrap()
                - z[2])
                .abs()
                < 1e-14
        );
        let idx = MultiIndex::new(4, vec![3], -2);
        let h = texture_map(
            TextureFunction::Harmonic(&idx),
            &[0.5],
            TextureGrid {
                n_theta2: 3,
                n_phi: 3,
            },
        )
        .unwrap();
        assert_eq!(h.len(), 9);
    }

    #[test]
    fn csv_output() {
        let model = SymmetrizedModel::builtin(PointGroup::PG1);
        let f = TextureFunction::Symmetrized {
            model: &model,
            row: 2,
        };
        let empty = texture_map(f, &[], TextureGrid::default()).unwrap();
        let mut buf = Vec::new();
        write_texture_csv(&mut buf, &empty).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "slice_theta1,theta2,phi,x1,x2,value\n"
        );
        let pts = texture_map(
            f,
            &[0.5],
            TextureGrid {
                n_theta2: 2,
                n_phi: 2,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_texture_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(!text.contains('\r'));
        assert!(!text.contains("-0,"));
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(2.5e-17), "2.5e-17");
        assert_eq!(format_float(0.5), "0.5");
        assert!(texture_map(f, &[4.0], TextureGrid::default()).is_err());
        assert!(texture_map(
            TextureFunction::Symmetrized {
                model: &model,
                row: 11
            },
            &[0.5],
            TextureGrid::default()
        )
        .is_err());
    }
}
