use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fieldtrack::assoc::{build_index, hungarian};
use fieldtrack::geometry::{
    estimate_alignment, estimate_alignment_iterative, AlignConfig, IterativeConfig, Transform4,
};
use fieldtrack::simulator::generate;
use fieldtrack::tracker::{track_sequence, TrackerConfig, WindowSpec};
use fieldtrack::{Point3, SceneConfig};
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    (0..n)
        .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
        .collect()
}

fn kdtree(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("kdtree");
    for n in [1_000usize, 10_000, 100_000] {
        let points = cloud(&mut rng, n);
        let queries = cloud(&mut rng, 1_000);
        group.bench_with_input(BenchmarkId::new("build", n), &points, |b, p| {
            b.iter(|| build_index(black_box(p)))
        });
        let index = build_index(&points);
        group.bench_with_input(BenchmarkId::new("1k_queries", n), &queries, |b, q| {
            b.iter(|| q.iter().map(|p| index.nearest(p).unwrap().0).sum::<usize>())
        });
    }
    group.finish();
}

fn assignment(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("hungarian");
    for n in [8usize, 32, 128] {
        let cost = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        group.bench_with_input(BenchmarkId::from_parameter(n), &cost, |b, m| {
            b.iter(|| hungarian(black_box(m), 0.5))
        });
    }
    group.finish();
}

fn alignment(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let src = cloud(&mut rng, 5_000);
    let t = Transform4::rigid(
        Vector3::new(0.2, 1.0, 0.1),
        0.3,
        Vector3::new(0.5, -0.2, 0.1),
    );
    let dst: Vec<Point3> = src.iter().map(|p| t.apply_point(p).unwrap()).collect();
    let mut group = c.benchmark_group("alignment_5k");
    group.bench_function("closed_form", |b| {
        b.iter(|| estimate_alignment(&src, &dst, &AlignConfig::default()).unwrap())
    });
    group.sample_size(10);
    group.bench_function("iterative", |b| {
        b.iter(|| estimate_alignment_iterative(&src, &dst, &IterativeConfig::default()).unwrap())
    });
    group.finish();
}

fn tracking(c: &mut Criterion) {
    let scene = SceneConfig {
        frames: 60,
        object_count: 5,
        window: Some(WindowSpec::new(10, 5).unwrap()),
        ..SceneConfig::default()
    };
    let (seq, _) = generate(&scene).unwrap();
    let mut group = c.benchmark_group("track_sequence");
    group.sample_size(10);
    group.bench_function("60_frames_5_objects", |b| {
        b.iter(|| track_sequence(&seq, &TrackerConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kdtree, assignment, alignment, tracking);
criterion_main!(benches);
