use std::path::Path;
use std::process::{Command, Output};

use sphdesign::design::{info_matrix, optimal_product_design, Design};
use sphdesign::harmonics::{BasisSpec, HarmonicBasis};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphdesign"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_design(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let path_str = path.to_str().unwrap().to_string();
    let mut full = vec!["design"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &path_str]);
    let out = run(&full);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path_str
}

#[test]
fn design_matches_in_process_construction() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_design(dir.path(), "opt.json", &["--m", "4", "--d", "4"]);
    let read = Design::read_json(&path).unwrap();
    let direct: Design = optimal_product_design(4, 4, 5, 9, -std::f64::consts::PI)
        .unwrap()
        .into();
    assert_eq!(read, direct);

    let csv_path = dir.path().join("m.csv");
    let out = run(&[
        "info",
        "--design",
        &path,
        "--d",
        "4",
        "--out",
        csv_path.to_str().unwrap(),
        "--json",
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["dim"], 55);
    assert!(summary["identity_residual"].as_f64().unwrap() <= 1e-10);

    let basis = HarmonicBasis::new(&BasisSpec::new(4, 4).unwrap()).unwrap();
    let m = info_matrix(&direct, &basis).unwrap();
    let text = std::fs::read_to_string(csv_path).unwrap();
    for (i, line) in text.lines().enumerate() {
        for (j, cell) in line.split(',').enumerate() {
            assert_eq!(cell.parse::<f64>().unwrap(), m.matrix()[(i, j)]);
        }
    }
}

#[test]
fn design_to_stdout_and_small_sphere() {
    let out = run(&["design", "--m", "3", "--d", "2"]);
    assert!(out.status.success());
    let design = Design::from_json(&stdout(&out)).unwrap();
    assert_eq!(design.m(), 3);
    assert_eq!(design.expand().len(), 3 * 5);
}

#[test]
fn validation_errors_exit_2() {
    let out = run(&["design", "--m", "4", "--d", "4", "--t", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2d+1"));
    let out = run(&[
        "efficiency",
        "--design",
        "/nonexistent.json",
        "--criterion",
        "D",
        "--d",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["texture", "--eta", "11"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_design_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("single.json");
    std::fs::write(
        &path,
        r#"{ "points": [[0.7, 1.1, 0.3]], "weights": [1.0] }"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let out = run(&["info", "--design", p, "--d", "2", "--json"]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["rank"], 1);
    let out = run(&[
        "efficiency",
        "--design",
        p,
        "--reference",
        p,
        "--criterion",
        "D",
        "--d",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn efficiency_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_design(dir.path(), "opt.json", &["--m", "4", "--d", "2"]);
    for crit in ["D", "A", "E", "phi-p=-2", "phi-es=9"] {
        let out = run(&[
            "efficiency",
            "--design",
            &path,
            "--criterion",
            crit,
            "--d",
            "2",
            "--json",
        ]);
        assert!(
            out.status.success(),
            "{crit}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let row: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert!(
            (row["efficiency"].as_f64().unwrap() - 1.0).abs() < 1e-12,
            "{crit}"
        );
    }
    let out = run(&[
        "certify",
        "--design",
        &path,
        "--criterion",
        "D",
        "--levels",
        "0,2",
        "--d",
        "2",
        "--grid",
        "21",
    ]);
    assert!(out.status.success());
    let cert: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cert["pass"], true);
    let out = run(&[
        "certify",
        "--design",
        &path,
        "--criterion",
        "phi-es",
        "--levels",
        "0,2",
        "--d",
        "2",
        "--grid",
        "21",
    ]);
    let cert: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cert["pass"], true);
    let out = run(&["certify", "--design", &path, "--criterion", "E", "--d", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn symmetry_actions() {
    let out = run(&["symm", "--group", "2", "--action", "table"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("group,eta,lambda,mu1,mu2,coeff_num,coeff_den,sign\n"));
    let out = run(&["symm", "--group", "1", "--action", "ortho-check", "--json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["functions"], 11);
    assert_eq!(report["pass"], true);
    let out = run(&["symm", "--group", "3", "--action", "table"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let design = write_design(dir.path(), "opt.json", &["--m", "4", "--d", "4"]);
    let out = run(&[
        "symm",
        "--group",
        "1",
        "--action",
        "efficiency",
        "--design",
        &design,
        "--candidates",
        "9,9,8",
        "--tol",
        "1e-6",
        "--json",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["d_efficiency"].as_f64().unwrap() >= 1.0 - 1e-6);
    let out = run(&[
        "symm",
        "--group",
        "2",
        "--action",
        "d-opt",
        "--candidates",
        "9,9,8",
        "--max-iter",
        "1",
        "--tol",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn texture_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&[
            "texture",
            "--group",
            "1",
            "--eta",
            "2",
            "--grid",
            "7,13",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("slice_theta1,theta2,phi,x1,x2,value\n"));
    assert_eq!(text.lines().count(), 1 + 6 * 7 * 13);
    let out = run(&["texture", "--eta", "2", "--slices", ""]);
    assert_eq!(stdout(&out), "slice_theta1,theta2,phi,x1,x2,value\n");
}
