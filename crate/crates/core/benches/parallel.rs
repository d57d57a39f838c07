//! Measures what the `parallel` feature buys on the two work-splitting hot
//! paths: the exhaustive loss-augmented scan (explicit sequential baseline
//! in-run) and cutting-plane training (toggle the feature and compare runs:
//! `cargo bench --bench parallel` vs
//! `cargo bench --bench parallel --no-default-features`).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use supseg_core::losses::LossFunction;
use supseg_core::model::{EdgeSet, GridShape, Labeling, UnaryFeatures, WeightVector};
use supseg_core::oracle::{
    brute_force_loss_augmented, brute_force_loss_augmented_sequential,
};
use supseg_core::ssvm::{train, TrainConfig};
use supseg_core::synth::{generate, StructureKind, SyntheticConfig};

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("exhaustive_loss_augmented");
    group.sample_size(20);
    for (width, height) in [(4, 3), (4, 4), (6, 3)] {
        let shape = GridShape::new(width, height).unwrap();
        let p = shape.pixels();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let features = UnaryFeatures::new(
            (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            p,
            1,
        )
        .unwrap();
        let w = WeightVector::new(vec![0.8], [0.0, -0.1, 0.1]).unwrap();
        let edges = EdgeSet::grid_4(shape);
        let y_star = Labeling::from_mask(rng.gen_range(1..1 << p), p);
        let loss = LossFunction::delta8_grid(0.5, shape).unwrap();
        group.bench_with_input(BenchmarkId::new("dispatch", p), &p, |b, _| {
            b.iter(|| brute_force_loss_augmented(&w, &features, &edges, &y_star, &loss).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", p), &p, |b, _| {
            b.iter(|| {
                brute_force_loss_augmented_sequential(&w, &features, &edges, &y_star, &loss)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let shape = GridShape::new(10, 10).unwrap();
    let samples = generate(&SyntheticConfig {
        shape,
        samples: 6,
        structure: StructureKind::Polylines,
        noise: 0.3,
        seed: 99,
    })
    .unwrap();
    let mut group = c.benchmark_group("training");
    group.sample_size(10);

    let mut hamming = TrainConfig::new(LossFunction::Hamming);
    hamming.c = 10.0;
    group.bench_function("hamming_10x10x6", |b| {
        b.iter(|| train(&samples, &hamming).unwrap())
    });

    let delta8 = TrainConfig::new(LossFunction::delta8_grid(0.5, shape).unwrap());
    group.bench_function("delta8_10x10x6", |b| {
        b.iter(|| train(&samples, &delta8).unwrap())
    });
    group.finish();
}

criterion_group!(benches, enumeration, training);
criterion_main!(benches);
