use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use sphdesign::criteria::{
    efficiency, equivalence_check_phi_es, equivalence_check_phi_p, selection_matrix, Criterion,
    EquivalenceGrid, LevelSelection, SelectionMatrix,
};
use sphdesign::design::{
    info_matrix, omega_tilde, optimal_product_design, uniform_continuous_info, Design,
    InformationMatrix,
};
use sphdesign::harmonics::{BasisSpec, HarmonicBasis};
use sphdesign::symmetry::{
    builtin_table, d_efficiency, d_optimal_search, d_value, functional_gram, CandidateGrid,
    PointGroup, SymmetrizedModel,
};
use sphdesign::viz_export::{
    default_slices, format_float, texture_map, write_texture_csv, TextureFunction, TextureGrid,
};
use sphdesign::{Error, Result};

use crate::{Command, ModelArgs, SymmAction};

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::Parameter(format!("bad {what} entry '{t}'")))
        })
        .collect()
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn write_or_print(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => emit(out, text)?,
    }
    Ok(())
}

fn model_spec(m: u32, args: &ModelArgs) -> Result<BasisSpec> {
    match &args.model_levels {
        Some(levels) => BasisSpec::with_levels(m, args.d, &parse_list::<u32>(levels, "level")?),
        None => BasisSpec::new(m, args.d),
    }
}

fn selection(spec: &BasisSpec, levels: Option<&str>) -> Result<SelectionMatrix> {
    let levels = match levels {
        Some(text) => LevelSelection::from_str(text)?,
        None => LevelSelection::new(spec.level_list())?,
    };
    selection_matrix(spec, &levels)
}

fn load(path: &Path) -> Result<Design> {
    Design::read_json(path)
}

pub fn run(command: &Command, json: bool, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Design {
            m,
            d,
            r,
            t,
            beta,
            out: file,
        } => {
            let design = optimal_product_design(
                *m,
                *d,
                r.unwrap_or(d + 1),
                t.unwrap_or(2 * d + 1),
                beta.unwrap_or(-PI),
            )?;
            let text = Design::Product(design.clone()).to_json()?;
            match file {
                None => emit(out, &text),
                Some(path) => {
                    std::fs::write(path, &text)?;
                    #[derive(Serialize)]
                    struct Summary<'a> {
                        m: u32,
                        d: u32,
                        support_points: usize,
                        path: &'a Path,
                    }
                    let s = Summary {
                        m: *m,
                        d: *d,
                        support_points: design.support_size(),
                        path,
                    };
                    if json {
                        emit_json(out, &s)
                    } else {
                        emit(
                            out,
                            &format!(
                                "wrote {}-point design for S_{} (d = {}) to {}\n",
                                s.support_points,
                                m,
                                d,
                                path.display()
                            ),
                        )
                    }
                }
            }
        }
        Command::Info {
            design,
            m,
            model,
            out: file,
        } => {
            let design = load(design)?;
            if let Some(m) = m {
                if *m != design.m() {
                    return Err(Error::Parameter(format!(
                        "--m {m} does not match the design (S_{})",
                        design.m()
                    )));
                }
            }
            let spec = model_spec(design.m(), model)?;
            let info = info_matrix(&design, &HarmonicBasis::new(&spec)?)?;
            if let Some(path) = file {
                std::fs::write(path, matrix_csv(&info))?;
            }
            let ev = info.eigenvalues();
            #[derive(Serialize)]
            struct Summary {
                dim: usize,
                rank: usize,
                eigenvalue_min: f64,
                eigenvalue_max: f64,
                identity_residual: f64,
                positive_semidefinite: bool,
            }
            let s = Summary {
                dim: info.dim(),
                rank: info.rank(),
                eigenvalue_min: ev[0],
                eigenvalue_max: ev[ev.len() - 1],
                identity_residual: info.identity_residual(1.0 / omega_tilde(design.m())?),
                positive_semidefinite: info.is_psd(),
            };
            if json {
                emit_json(out, &s)
            } else {
                let mut text = String::new();
                writeln!(text, "dim {}", s.dim).ok();
                writeln!(text, "rank {}", s.rank).ok();
                writeln!(text, "eigenvalue_min {:e}", s.eigenvalue_min).ok();
                writeln!(text, "eigenvalue_max {:e}", s.eigenvalue_max).ok();
                writeln!(text, "identity_residual {:e}", s.identity_residual).ok();
                writeln!(text, "positive_semidefinite {}", s.positive_semidefinite).ok();
                emit(out, &text)
            }
        }
        Command::Efficiency {
            design,
            reference,
            criterion,
            levels,
            model,
        } => {
            let criterion = Criterion::from_str(criterion)?;
            let design = load(design)?;
            let spec = model_spec(design.m(), model)?;
            let basis = HarmonicBasis::new(&spec)?;
            let k = selection(&spec, levels.as_deref())?;
            let m = info_matrix(&design, &basis)?;
            let reference_info = reference_matrix(reference, &spec, &basis, design.m())?;
            let eff = efficiency(&m, &reference_info, criterion, &k)?;
            #[derive(Serialize)]
            struct Row {
                criterion: String,
                value: f64,
                reference_value: f64,
                efficiency: f64,
            }
            let row = Row {
                criterion: criterion.to_string(),
                value: criterion.value(&m, &k)?,
                reference_value: criterion.value(&reference_info, &k)?,
                efficiency: eff,
            };
            if json {
                emit_json(out, &row)
            } else {
                emit(
                    out,
                    &format!(
                        "criterion,value,reference_value,efficiency\n{},{},{},{}\n",
                        row.criterion, row.value, row.reference_value, row.efficiency
                    ),
                )
            }
        }
        Command::Certify {
            design,
            criterion,
            levels,
            model,
            grid,
        } => {
            let design = load(design)?;
            let spec = model_spec(design.m(), model)?;
            let basis = HarmonicBasis::new(&spec)?;
            let k = selection(&spec, levels.as_deref())?;
            let grid = EquivalenceGrid::with_resolution(*grid);
            let cert = if criterion.trim() == "phi-es" || criterion.starts_with("phi-es=") {
                if let Some(s) = criterion.strip_prefix("phi-es=") {
                    let s: usize = s
                        .parse()
                        .map_err(|_| Error::Parameter(format!("bad s value '{s}'")))?;
                    if s != k.s() {
                        return Err(Error::Parameter(format!(
                            "phi-es={s} but the selected levels give s = {}",
                            k.s()
                        )));
                    }
                }
                equivalence_check_phi_es(&design, &basis, &k, grid)?
            } else {
                let p = Criterion::from_str(criterion)?.p().expect("phi-p family");
                equivalence_check_phi_p(&design, &basis, &k, p, grid)?
            };
            emit_json(out, &cert)
        }
        Command::Symm {
            group,
            action,
            design,
            candidates,
            max_iter,
            tol,
            out: file,
        } => {
            let group = PointGroup::from_number(*group)?;
            let model = SymmetrizedModel::builtin(group);
            match action {
                SymmAction::Table => {
                    let table = builtin_table(group);
                    if json {
                        emit_json(out, &table)
                    } else {
                        emit(out, &table.to_csv()?)
                    }
                }
                SymmAction::OrthoCheck => {
                    let rep = model.table().orthonormality();
                    let gram = functional_gram(&model)?;
                    let gram_residual =
                        InformationMatrix::from_matrix(gram)?.identity_residual(1.0);
                    #[derive(Serialize)]
                    struct Report {
                        functions: usize,
                        max_norm_error: f64,
                        max_cross_product: f64,
                        gram_residual: f64,
                        pass: bool,
                    }
                    let r = Report {
                        functions: model.dim(),
                        max_norm_error: rep.max_norm_error,
                        max_cross_product: rep.max_cross_product,
                        gram_residual,
                        pass: rep.max_norm_error <= 1e-12
                            && rep.max_cross_product <= 1e-12
                            && gram_residual <= 1e-10,
                    };
                    if json {
                        emit_json(out, &r)
                    } else {
                        emit(
                            out,
                            &format!(
                                "functions {}\nmax_norm_error {:e}\nmax_cross_product {:e}\ngram_residual {:e}\npass {}\n",
                                r.functions, r.max_norm_error, r.max_cross_product, r.gram_residual, r.pass
                            ),
                        )
                    }
                }
                SymmAction::DOpt | SymmAction::Efficiency => {
                    let sizes = parse_list::<usize>(candidates, "candidate grid")?;
                    if sizes.len() != 3 {
                        return Err(Error::Parameter(
                            "--candidates needs n_theta1,n_theta2,n_phi".into(),
                        ));
                    }
                    let grid = CandidateGrid::chebyshev(sizes[0], sizes[1], sizes[2])?;
                    let target = match (action, design) {
                        (SymmAction::Efficiency, None) => {
                            return Err(Error::Parameter(
                                "--action efficiency needs --design".into(),
                            ))
                        }
                        (_, Some(path)) => Some(load(path)?),
                        _ => None,
                    };
                    let result = d_optimal_search(&model, &grid, *max_iter, *tol)?;
                    if let Some(path) = file {
                        Design::Points(result.design.clone()).write_json(path)?;
                    }
                    #[derive(Serialize)]
                    struct Report {
                        functions: usize,
                        reference_d_value: f64,
                        kw_gap: f64,
                        iterations: usize,
                        support_points: usize,
                        #[serde(skip_serializing_if = "Option::is_none")]
                        design_d_value: Option<f64>,
                        #[serde(skip_serializing_if = "Option::is_none")]
                        d_efficiency: Option<f64>,
                    }
                    let (design_d_value, d_eff) = match &target {
                        Some(d) => (
                            Some(d_value(&model, d)?),
                            Some(d_efficiency(&model, d, result.d_value)?),
                        ),
                        None => (None, None),
                    };
                    let r = Report {
                        functions: model.dim(),
                        reference_d_value: result.d_value,
                        kw_gap: result.certificate.gap,
                        iterations: result.certificate.iterations,
                        support_points: result.design.points().len(),
                        design_d_value,
                        d_efficiency: d_eff,
                    };
                    if json {
                        emit_json(out, &r)
                    } else {
                        let mut text = format!(
                            "functions {}\nreference_d_value {}\nkw_gap {:e}\niterations {}\nsupport_points {}\n",
                            r.functions, r.reference_d_value, r.kw_gap, r.iterations, r.support_points
                        );
                        if let (Some(v), Some(e)) = (r.design_d_value, r.d_efficiency) {
                            writeln!(text, "design_d_value {v}\nd_efficiency {e}").ok();
                        }
                        emit(out, &text)
                    }
                }
            }
        }
        Command::Texture {
            group,
            lambda,
            eta,
            slices,
            grid,
            out: file,
        } => {
            let model = SymmetrizedModel::builtin(PointGroup::from_number(*group)?);
            let row = model
                .table()
                .rows
                .iter()
                .position(|r| r.lambda == *lambda && r.eta == *eta)
                .ok_or_else(|| {
                    Error::Parameter(format!("point group {group} has no Z_{lambda}^{eta}"))
                })?;
            let slices = match slices {
                Some(text) if text.trim().is_empty() => Vec::new(),
                Some(text) => parse_list::<f64>(text, "slice")?,
                None => default_slices(),
            };
            let sizes = parse_list::<usize>(grid, "grid")?;
            if sizes.len() != 2 {
                return Err(Error::Parameter("--grid needs n_theta2,n_phi".into()));
            }
            let points = texture_map(
                TextureFunction::Symmetrized { model: &model, row },
                &slices,
                TextureGrid {
                    n_theta2: sizes[0],
                    n_phi: sizes[1],
                },
            )?;
            let mut buf = Vec::new();
            write_texture_csv(&mut buf, &points)?;
            let text = String::from_utf8(buf).expect("ascii csv");
            write_or_print(file.as_deref(), &text, out)
        }
    }
}

fn reference_matrix(
    reference: &str,
    spec: &BasisSpec,
    basis: &HarmonicBasis,
    m: u32,
) -> Result<InformationMatrix> {
    if reference == "optimal" {
        return uniform_continuous_info(spec);
    }
    let design = load(Path::new(reference))?;
    if design.m() != m {
        return Err(Error::Parameter(format!(
            "reference design is on S_{}, design on S_{m}",
            design.m()
        )));
    }
    info_matrix(&design, basis)
}

fn matrix_csv(info: &InformationMatrix) -> String {
    let m = info.matrix();
    let mut text = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_float(m[(i, j)])).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}
