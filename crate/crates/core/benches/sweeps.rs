use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sipg_core::dyadic::DEFAULT_ALPHA;
use sipg_core::lab::{constant_for, grid_queries, run_queries, ConstantQuery, Inequality};
use sipg_core::lgl::lgl_grid;

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("constant_sweep");
    group.sample_size(10);
    for max in [4u32, 8] {
        group.bench_with_input(BenchmarkId::new("sequential", max), &max, |b, &max| {
            b.iter(|| run_queries(grid_queries(max, DEFAULT_ALPHA), false).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", max), &max, |b, &max| {
            b.iter(|| run_queries(grid_queries(max, DEFAULT_ALPHA), true).unwrap())
        });
    }
    group.finish();
}

fn bench_single_constant(c: &mut Criterion) {
    let mut group = c.benchmark_group("single_constant");
    group.sample_size(10);
    for p in [16u32, 32] {
        lgl_grid(p).unwrap();
        group.bench_with_input(BenchmarkId::new("basic0", p), &p, |b, &p| {
            b.iter(|| {
                constant_for(ConstantQuery::new(Inequality::Basic0, 1, p, p)).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("basic1", p), &p, |b, &p| {
            b.iter(|| {
                constant_for(ConstantQuery::new(Inequality::Basic1, 1, p, p)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_single_constant);
criterion_main!(benches);
