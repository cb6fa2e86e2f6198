use criterion::{criterion_group, criterion_main, Criterion};
use src_geolab_bench::{equator, equator_problem, sphere};
use src_geolab_core::geodesic::DEFAULT_STEPS;
use src_geolab_core::index::hessian_j;
use src_geolab_core::{
    build_family, finsler_geodesic_ivp, hessian_e, residual, shoot_bvp, src_backward, verify_src_index, IndexOptions, SprayEvaluator,
};
use std::hint::black_box;

fn pointwise(c: &mut Criterion) {
    let m = sphere(0.3);
    let spray = SprayEvaluator::new(&m);
    c.bench_function("jet", |b| b.iter(|| m.jet(black_box(&[0.3, -0.2]), black_box(&[1.0, 0.5])).unwrap()));
    c.bench_function("spray", |b| b.iter(|| spray.acceleration(black_box(&[0.3, -0.2]), black_box(&[1.0, 0.5])).unwrap()));
}

fn geodesics(c: &mut Criterion) {
    let m = sphere(0.3);
    c.bench_function("ivp_1000", |b| b.iter(|| finsler_geodesic_ivp(&m, &[1.0, 0.0], black_box(&[0.0, 4.7]), DEFAULT_STEPS).unwrap()));
    c.bench_function("shoot_sphere_wind", |b| b.iter(|| shoot_bvp(&m, black_box(&equator_problem())).unwrap()));
}

fn index(c: &mut Criterion) {
    let m = sphere(0.3);
    let x = equator(&m);
    let g = src_backward(&m).unwrap();
    let mut group = c.benchmark_group("index");
    group.sample_size(10);
    group.bench_function("hessian_e_64", |b| b.iter(|| hessian_e(&m, &x, 64).unwrap()));
    group.bench_function("hessian_j_64", |b| b.iter(|| hessian_j(&m, &g, &x, 64).unwrap()));
    group.bench_function("verify_src_64", |b| b.iter(|| verify_src_index(&m, &x, "bench", IndexOptions::default()).unwrap()));
    group.finish();
}

fn probe(c: &mut Criterion) {
    let m = sphere(0.3);
    let x = equator(&m);
    let fam = build_family(vec![0.5, 0.5], vec![0.5, 0.5], 0.4, 0.2, 1e-2).unwrap();
    c.bench_function("residual", |b| b.iter(|| residual(&m, &x, black_box(&fam)).unwrap()));
}

criterion_group!(benches, pointwise, geodesics, index, probe);
criterion_main!(benches);
