use coda_bench::s1_pair;
use coda_core::subspace::{
    bootstrap_p_value, schott_null_params, test_statistic, BootstrapOptions, SchottOptions,
};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn statistic(c: &mut Criterion) {
    let ilr = s1_pair(100, 100, 3);
    c.bench_function("statistic_100x100", |b| {
        b.iter(|| test_statistic(black_box(&ilr), 2).unwrap())
    });
}

fn schott(c: &mut Criterion) {
    let ilr = s1_pair(100, 100, 3);
    let opts = SchottOptions::default();
    c.bench_function("schott_params_100x100", |b| {
        b.iter(|| schott_null_params(black_box(&ilr), 2, &opts).unwrap())
    });
}

fn bootstrap(c: &mut Criterion) {
    let ilr = s1_pair(100, 100, 3);
    let opts = BootstrapOptions::new(200, 9);
    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    group.bench_function("n_boot_200_100x100", |b| {
        b.iter(|| bootstrap_p_value(black_box(&ilr), 2, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, statistic, schott, bootstrap);
criterion_main!(benches);
