use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vexlab_bench::{sine_bump, unit_interval, unit_square, variable_exponent};
use vexlab_core::modular::LUXEMBURG_TOL;
use vexlab_core::{apply_aeps, build_mesh, luxemburg_norm, nehari_candidate, solve_regularized, Domain, ExponentField, SolveConfig};

fn mesh_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("mesh_build");
    let square = Domain::square(0.0, 1.0).unwrap();
    let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
    for h in [0.05, 0.02] {
        g.bench_with_input(BenchmarkId::new("square", h), &h, |b, &h| b.iter(|| build_mesh(black_box(&square), h).unwrap()));
        g.bench_with_input(BenchmarkId::new("disk", h), &h, |b, &h| b.iter(|| build_mesh(black_box(&disk), h).unwrap()));
    }
    g.finish();
}

fn luxemburg(c: &mut Criterion) {
    let mut g = c.benchmark_group("luxemburg_norm");
    for h in [0.05, 0.02] {
        let m = unit_square(h);
        let u = sine_bump(&m, 3.0);
        let p = variable_exponent(2);
        g.bench_with_input(BenchmarkId::from_parameter(m.num_cells()), &u, |b, u| {
            b.iter(|| luxemburg_norm(black_box(u), &p, LUXEMBURG_TOL).unwrap())
        });
    }
    g.finish();
}

fn operator(c: &mut Criterion) {
    let m = unit_square(0.02);
    let z = sine_bump(&m, 1.0);
    let p = variable_exponent(2);
    c.bench_function("apply_aeps/square_h0.02", |b| b.iter(|| apply_aeps(black_box(&z), &p, 1e-3).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);
    let cfg = SolveConfig::default();
    let m = unit_square(0.05);
    let v = sine_bump(&m, 10.0);
    let p = variable_exponent(2);
    let q = ExponentField::constant(1.5);
    g.bench_function("solve_regularized/square_h0.05", |b| {
        b.iter(|| solve_regularized(black_box(&v), &p, &q, 1e-3, &cfg, None).unwrap())
    });
    let line = unit_interval(1e-3);
    let (p2, q4) = (ExponentField::constant(2.0), ExponentField::constant(4.0));
    g.bench_function("nehari_candidate/interval_h1e-3", |b| {
        b.iter(|| nehari_candidate(&p2, &q4, line.clone(), &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, mesh_build, luxemburg, operator, solvers);
criterion_main!(benches);
