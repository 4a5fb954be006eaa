use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ruelle_bench::fixture_symplectic;
use ruelle_core::flows::{integrate_cocycle, ToricField};
use ruelle_core::symplin::{eigenvalue_quasimorphism_base, polar_decompose, polar_derivative};
use ruelle_core::toric::{ruelle_invariant_toric, systole_concave};
use ruelle_core::{MomentRegion, QuadratureSpec};
use std::hint::black_box;

fn polar(c: &mut Criterion) {
    let mut group = c.benchmark_group("polar");
    for n in [1, 2, 3] {
        let a = fixture_symplectic(n);
        let d = a.matrix().transpose();
        group.bench_with_input(BenchmarkId::new("decompose", n), &a, |b, a| b.iter(|| polar_decompose(black_box(a))));
        group.bench_with_input(BenchmarkId::new("derivative", n), &a, |b, a| {
            b.iter(|| polar_derivative(black_box(a), black_box(&d)))
        });
        group.bench_with_input(BenchmarkId::new("eigenvalue_quasimorphism", n), &a, |b, a| {
            b.iter(|| eigenvalue_quasimorphism_base(black_box(a)))
        });
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("toric");
    let spec = QuadratureSpec::with_rel_tol(1e-8);
    for (label, region) in [
        ("ru_pfamily_n2", MomentRegion::pfamily(vec![1.0, 2.0], 0.5).unwrap()),
        ("ru_pfamily_n3", MomentRegion::pfamily(vec![1.0, 2.0, 3.0], 2.0).unwrap()),
    ] {
        group.bench_function(label, |b| b.iter(|| ruelle_invariant_toric(black_box(&region), &spec)));
    }
    let concave = MomentRegion::pfamily(vec![1.0, 1.3, 1.7], 0.6).unwrap();
    group.bench_function("systole_pfamily_n3", |b| b.iter(|| systole_concave(black_box(&concave))));
    group.finish();
}

fn cocycle(c: &mut Criterion) {
    let field = ToricField::new(MomentRegion::pfamily(vec![1.0, 1.5], 2.0).unwrap()).unwrap();
    let x0 = [0.2, 0.1, -0.15, 0.05];
    c.bench_function("cocycle_t10", |b| b.iter(|| integrate_cocycle(&field, black_box(&x0), 10.0, 1e-3)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = polar, quadrature, cocycle
}
criterion_main!(benches);
