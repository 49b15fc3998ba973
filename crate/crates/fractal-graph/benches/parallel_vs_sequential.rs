use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fractal_graph::cantor4::{c4_ifs, davies_random_check};
use fractal_graph::exec;
use fractal_graph::favard::{favard_length, AngleGrid};
use fractal_graph::ifs::generation;
use fractal_graph::ConvexPolygon;

fn modes(c: &mut Criterion) {
    let ifs = c4_ifs();
    let square = ConvexPolygon::unit_square();
    let gen5 = generation(&ifs, &square, 5).unwrap();
    let grid = AngleGrid::new(1024).unwrap();

    let mut group = c.benchmark_group("favard_c4_gen5");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("mode", "parallel"), |b| b.iter(|| favard_length(&gen5, grid)));
    group.bench_function(BenchmarkId::new("mode", "sequential"), |b| {
        b.iter(|| exec::sequential(|| favard_length(&gen5, grid)))
    });
    group.finish();

    let mut group = c.benchmark_group("davies_random_10k");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("mode", "parallel"), |b| b.iter(|| davies_random_check(10_000, 1)));
    group.bench_function(BenchmarkId::new("mode", "sequential"), |b| {
        b.iter(|| exec::sequential(|| davies_random_check(10_000, 1)))
    });
    group.finish();

    let mut group = c.benchmark_group("generation_c4_8");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("mode", "parallel"), |b| b.iter(|| generation(&ifs, &square, 8).unwrap()));
    group.bench_function(BenchmarkId::new("mode", "sequential"), |b| {
        b.iter(|| exec::sequential(|| generation(&ifs, &square, 8).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, modes);
criterion_main!(benches);
