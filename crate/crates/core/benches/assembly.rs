//! Run twice to compare backends:
//! `cargo bench -p sphdesign` and `cargo bench -p sphdesign --no-default-features`.

use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sphdesign::criteria::{equivalence_check_phi_p, selection_matrix, EquivalenceGrid};
use sphdesign::design::{info_matrix, optimal_product_design, Design};
use sphdesign::harmonics::{BasisSpec, HarmonicBasis};
use sphdesign::parallel::is_parallel;

fn backend() -> &'static str {
    if is_parallel() {
        "rayon"
    } else {
        "sequential"
    }
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("info_matrix/{}", backend()));
    for (m, d) in [(4u32, 4u32), (5, 4)] {
        let basis = HarmonicBasis::new(&BasisSpec::new(m, d).unwrap()).unwrap();
        let design: Design = optimal_product_design(m, d, 2 * d, 2 * d + 1, -PI)
            .unwrap()
            .into();
        group.bench_function(format!("m{m}_d{d}"), |b| {
            b.iter(|| info_matrix(black_box(&design), &basis).unwrap())
        });
    }
    group.finish();
}

fn scan(c: &mut Criterion) {
    let spec = BasisSpec::new(4, 4).unwrap();
    let basis = HarmonicBasis::new(&spec).unwrap();
    let k = selection_matrix(&spec, &"0,4".parse().unwrap()).unwrap();
    let design: Design = optimal_product_design(4, 4, 5, 9, -PI).unwrap().into();
    let grid = EquivalenceGrid::with_resolution(21);
    let mut group = c.benchmark_group(format!("equivalence_scan/{}", backend()));
    group.sample_size(10);
    group.bench_function("m4_d4_phi0", |b| {
        b.iter(|| equivalence_check_phi_p(black_box(&design), &basis, &k, 0.0, grid).unwrap())
    });
    group.finish();
}

criterion_group!(benches, assembly, scan);
criterion_main!(benches);
