use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use quasireg_bench::{grid, plant, square, triangular};
use quasireg_core::solver::{solvability_pipeline, PipelineOptions};

fn bench_pipeline(c: &mut Criterion) {
    let opts = PipelineOptions::default();
    let g = grid(50.0, 0.01);
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("triangular, unit relative degree", |b| {
        b.iter(|| solvability_pipeline(black_box(&plant(0.0)), &triangular(), &g, &opts).unwrap())
    });
    group.bench_function("square, feedthrough", |b| {
        b.iter(|| solvability_pipeline(black_box(&plant(1.0)), &square(), &g, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
