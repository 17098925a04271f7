use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use poince::design::lhs_maximin;
use poince::expansion::{fit_poince, fit_poince_der, FitConfig, InputSpace};
use poince::marginals::{prepare, Family};
use poince::models::{dyke_marginals, Dyke};
use poince::{Marginal, Model, PoincareBasis1D, Truncation};
use std::hint::black_box;

fn fem_build(c: &mut Criterion) {
    let tri = Marginal::new(Family::Triangular { lower: 49.0, mode: 50.0, upper: 51.0 }).unwrap();
    let standard = prepare(&tri).unwrap().standard;
    let mut group = c.benchmark_group("fem_build");
    for grid_n in [250, 1000, 4000] {
        group.bench_with_input(BenchmarkId::from_parameter(grid_n), &grid_n, |b, &n| {
            b.iter(|| PoincareBasis1D::build_fem(black_box(&standard), 5, n).unwrap())
        });
    }
    group.finish();
}

fn row_assembly(c: &mut Criterion) {
    let space = InputSpace::with_default_grid(&dyke_marginals(), 5).unwrap();
    let basis = space.basis_set(Truncation::total_degree(5)).unwrap();
    let design = lhs_maximin(&space.model_marginals(), 200, 0, 1);
    let u = space.standardize_all(&design.points).unwrap();
    c.bench_function("matrix_d8_p5_n200", |b| b.iter(|| basis.matrix(black_box(&u)).unwrap()));
    c.bench_function("deriv_matrix_d8_p5_n200", |b| b.iter(|| basis.deriv_matrix(0, black_box(&u)).unwrap()));
}

fn lars_fit(c: &mut Criterion) {
    let space = InputSpace::with_default_grid(&dyke_marginals(), 3).unwrap();
    let dyke = Dyke::default();
    let mut group = c.benchmark_group("dyke_fit_p3");
    group.sample_size(10);
    for n in [100, 400] {
        let design = lhs_maximin(&space.model_marginals(), n, 1, 1);
        let y: Vec<f64> = design.points.iter().map(|x| dyke.value(x)).collect();
        let dq: Vec<f64> = design.points.iter().map(|x| dyke.gradient(x)[0]).collect();
        let cfg = FitConfig::fixed(3);
        group.bench_with_input(BenchmarkId::new("poince", n), &n, |b, _| {
            b.iter(|| fit_poince(&space, &design.points, black_box(&y), &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("poince_der", n), &n, |b, _| {
            b.iter(|| fit_poince_der(&space, &design.points, black_box(&dq), 0, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fem_build, row_assembly, lars_fit);
criterion_main!(benches);
