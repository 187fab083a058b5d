use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use refinebench::metrics;
use refinebench::stats::{bootstrap_ci_diff, mcnemar_exact};
use refinebench_bench::{hints, logs, pairs};

fn mcnemar(c: &mut Criterion) {
    let mut g = c.benchmark_group("mcnemar_exact");
    for n in [20u64, 200, 2000] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| mcnemar_exact(black_box(n / 3), black_box(n - n / 3))));
    }
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let mut g = c.benchmark_group("bootstrap_10k");
    g.sample_size(20);
    for n in [47usize, 200] {
        let data = pairs(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| b.iter(|| bootstrap_ci_diff(d, 10_000, 42).unwrap()));
    }
    g.finish();
}

fn calibration(c: &mut Criterion) {
    let h = hints(5_000, 3);
    c.bench_function("ece_5000", |b| b.iter(|| metrics::ece(black_box(&h)).unwrap()));
}

fn curves(c: &mut Criterion) {
    let l = logs(1_000, 4);
    c.bench_function("itr_curve_1000", |b| b.iter(|| metrics::itr_curve(black_box(&l)).unwrap()));
    c.bench_function("summary_row_1000", |b| b.iter(|| metrics::summary_row(black_box(&l)).unwrap()));
}

criterion_group!(benches, mcnemar, bootstrap, calibration, curves);
criterion_main!(benches);
