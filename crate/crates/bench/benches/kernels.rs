use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use integrable_core::bachet::{chain, compose_maps, division_poly_map, BigRational, Curve};
use integrable_core::catmap::{extended_orbit, ExtendedTorusState, ToralAutomorphism};
use integrable_core::euler_top::{modulated_flow, spectral_invariants, InertiaSpec, RigidBodyState};
use integrable_core::modulation::ModulationProfile;
use integrable_core::numerics::{sym_eigen, IntegratorConfig, SkewMatrix, SymMatrix};
use integrable_core::quadrics::{integrate_geodesic, GeodesicState, Quadric};

fn numerics(c: &mut Criterion) {
    let s = SymMatrix::from_fn(8, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 2.0 } else { 0.0 });
    c.bench_function("jacobi eigen 8x8", |b| b.iter(|| sym_eigen(black_box(&s)).unwrap()));
}

fn euler(c: &mut Criterion) {
    let m = SkewMatrix::from_fn(4, |i, j| 0.1 * (i + 2 * j) as f64 - 0.3);
    let j0 = SymMatrix::diagonal(&[1.0, 2.0, 3.0, 4.0]);
    c.bench_function("spectral invariants N=4", |b| b.iter(|| spectral_invariants(black_box(&m), &j0).unwrap()));
    let inertia = InertiaSpec::new(j0, Some(ModulationProfile::sinusoidal(0.0, 0.3, 1.0))).unwrap();
    let s0 = RigidBodyState::new(m);
    let cfg = IntegratorConfig::adaptive(1e-10);
    c.bench_function("modulated top N=4 over one period", |b| {
        b.iter(|| modulated_flow(black_box(&s0), &inertia, 1.0, &cfg).unwrap())
    });
}

fn bachet(c: &mut Criterion) {
    let curve = Curve::from_i64(-2).unwrap();
    let p0 = curve.point_from_strs("3", "5").unwrap();
    c.bench_function("bachet chain k=3", |b| b.iter(|| chain(black_box(&p0), &curve, 3).unwrap()));
    let cc = BigRational::from_integer((-2).into());
    let b2 = division_poly_map(2, &cc).unwrap();
    let b3 = division_poly_map(3, &cc).unwrap();
    c.bench_function("compose B2 after B3", |b| b.iter(|| compose_maps(black_box(&b2), &b3).unwrap()));
}

fn maps_and_flows(c: &mut Criterion) {
    let a = ToralAutomorphism::cat();
    let s0 = ExtendedTorusState::from_eigen([0.1, 0.2], 0.5, -0.7);
    c.bench_function("cat map lift 10^4 steps", |b| b.iter(|| extended_orbit(&a, black_box(&s0), 10_000)));
    let q = Quadric::new(vec![1.0, 2.0, 3.0]).unwrap();
    let g0 = GeodesicState::on_quadric(&q, &[0.6, 0.4, 0.3], &[0.3, -0.7, 0.5]).unwrap();
    let cfg = IntegratorConfig::adaptive(1e-10).with_projection(true);
    c.bench_function("ellipsoid geodesic s=10", |b| b.iter(|| integrate_geodesic(black_box(&g0), &q, 10.0, &cfg).unwrap()));
}

criterion_group!(benches, numerics, euler, bachet, maps_and_flows);
criterion_main!(benches);
