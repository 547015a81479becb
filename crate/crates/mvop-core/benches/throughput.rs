//! Throughput benches for the data-parallel kernels: family construction,
//! band extraction, and the fd validation harness.
//!
//! With the default `parallel` feature each workload is measured twice: on
//! the default rayon pool and pinned to a single-thread pool, giving an
//! in-run parallel-vs-sequential comparison. Building with
//! `--no-default-features` measures the plain sequential code path instead.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use std::sync::Arc;

use mvop_core::diffop::compute_g;
use mvop_core::hermite::{casimir, hermite_weight, HermiteParams};
use mvop_core::linalg::CMatrix;
use mvop_core::mvop::build_family;
use mvop_core::quadrature::make_gauss_hermite;
use mvop_core::toda::fd_validate;
use mvop_core::weight::{MatrixPolynomial, WeightSpec};

fn bench_modes<F: Fn() + Sync>(c: &mut Criterion, name: &str, f: F) {
    #[cfg(feature = "parallel")]
    {
        c.bench_function(&format!("{name}/par"), |b| b.iter(&f));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        c.bench_function(&format!("{name}/seq1"), |b| b.iter(|| pool.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    c.bench_function(&format!("{name}/seq"), |b| b.iter(&f));
}

fn scalar_weight(coeffs: &[f64]) -> WeightSpec {
    WeightSpec::new(
        1,
        (f64::NEG_INFINITY, f64::INFINITY),
        Arc::new(|_x| CMatrix::identity(1)),
        true,
        MatrixPolynomial::scalar(1, coeffs).unwrap(),
        "scalar hermite",
    )
    .unwrap()
}

fn bench_family_build(c: &mut Criterion) {
    let p = HermiteParams::new(4, vec![1.0, 0.7, 0.4]).unwrap();
    let w = hermite_weight(&p);
    let rule = make_gauss_hermite(40).unwrap();
    bench_modes(c, "build_family_4x4_nmax12", move || {
        black_box(build_family(&w, 0.5, 12, &rule).unwrap());
    });
}

fn bench_compute_g(c: &mut Criterion) {
    let p = HermiteParams::new(4, vec![1.0, 0.7, 0.4]).unwrap();
    let w = hermite_weight(&p);
    let rule = make_gauss_hermite(40).unwrap();
    let fam = build_family(&w, 0.5, 12, &rule).unwrap();
    let lambda = casimir(&p);
    bench_modes(c, "compute_g_4x4_nmax12", move || {
        black_box(compute_g(&fam, &lambda, &rule).unwrap());
    });
}

fn bench_fd_validate(c: &mut Criterion) {
    let w = scalar_weight(&[0.0, 0.0, 1.0]);
    let lambda = MatrixPolynomial::scalar(1, &[0.0, 0.0, 1.0]).unwrap();
    let rule = make_gauss_hermite(96).unwrap();
    bench_modes(c, "fd_validate_k2_scalar", move || {
        black_box(fd_validate(&w, &lambda, 0.2, 1e-4, 8, &rule).unwrap());
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_family_build, bench_compute_g, bench_fd_validate
}
criterion_main!(benches);
