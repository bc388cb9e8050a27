use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use parisi_core::finite_model::disorder_average;
use parisi_core::optimizer::minimize_k;
use parisi_core::phase::{boundary_scan, RS_TOL};
use parisi_core::{MixtureSpec, OptimizerOptions, Parallelism, QuadratureConfig};

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn bench_disorder_average(c: &mut Criterion) {
    let spec = MixtureSpec::pure(2, 1.0, 0.2).unwrap();
    let mut group = c.benchmark_group("disorder_average_n12_x32");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| disorder_average(black_box(&spec), 12, &[2, 4], 32, 1, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_multistart(c: &mut Criterion) {
    let spec = MixtureSpec::pure(2, 1.2, 0.0).unwrap();
    let quad = QuadratureConfig::default();
    let mut group = c.benchmark_group("minimize_k2_restarts8");
    group.sample_size(10);
    for (name, mode) in MODES {
        let opts = OptimizerOptions {
            parallelism: mode,
            ..OptimizerOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| minimize_k(black_box(&spec), 2, &opts, &quad).unwrap())
        });
    }
    group.finish();
}

fn bench_scan(c: &mut Criterion) {
    let base = MixtureSpec::pure(2, 0.3, 0.0).unwrap();
    let quad = QuadratureConfig::default();
    let grid: Vec<f64> = (0..6).map(|i| 0.3 + 0.2 * i as f64).collect();
    let mut group = c.benchmark_group("boundary_scan_6pts");
    group.sample_size(10);
    for (name, mode) in MODES {
        let opts = OptimizerOptions {
            parallelism: mode,
            ..OptimizerOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| boundary_scan(black_box(&base), 2, &grid, 2, RS_TOL, 0.05, &quad, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_disorder_average, bench_multistart, bench_scan);
criterion_main!(benches);
