use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use retigrade_bench as fx;
use retigrade_core::grader;
use retigrade_core::symbolic;
use retigrade_core::{extract_regions, GradePair, SizeThresholds, TrainConfig};

fn labeling(c: &mut Criterion) {
    let mut group = c.benchmark_group("labeling");
    for density in [0.05, 0.3, 0.6] {
        let mask = fx::noise_mask(1024, density, 1);
        group.throughput(Throughput::Elements(1024 * 1024));
        group.bench_with_input(BenchmarkId::new("noise_1024", density), &mask, |b, m| {
            b.iter(|| extract_regions(black_box(m)))
        });
    }
    group.finish();
}

fn features(c: &mut Criterion) {
    let sets = fx::synthetic_region_sets(1024, 2);
    let t = SizeThresholds::default();
    c.bench_function("features/extended", |b| b.iter(|| symbolic::extended_features(black_box(&sets), &t)));
    c.bench_function("features/simple", |b| b.iter(|| symbolic::simple_features(black_box(&sets))));
}

fn forward(c: &mut Criterion) {
    let network = fx::network(3);
    let input = fx::standardized_input(4);
    let label = GradePair::new(2, 1).expect("in range");
    c.bench_function("network/forward", |b| b.iter(|| network.forward(black_box(&input), None)));
    c.bench_function("network/loss_and_gradient", |b| b.iter(|| network.loss_and_gradient(black_box(&input), label)));
}

fn training(c: &mut Criterion) {
    let data = fx::dataset(1600, 5);
    let config = TrainConfig { max_epochs: 1, patience: 1, ..Default::default() };
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.throughput(Throughput::Elements(data.len() as u64));
    group.bench_function("one_epoch_1600", |b| {
        b.iter(|| grader::train(black_box(&data), &config, SizeThresholds::default()))
    });
    group.finish();
}

criterion_group!(benches, labeling, features, forward, training);
criterion_main!(benches);
