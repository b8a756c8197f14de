//! Criterion benchmarks for the numeric kernels and one training epoch.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion, Throughput};
use pkge_core::dataset::{build_filter, build_groups};
use pkge_core::linalg::{gaussian_matrix, svd_square};
use pkge_core::synthetic::random_kg;
use pkge_core::{evaluate, solve_opa, ScoreKind, TrainConfig, TrainState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn benchmarks(c: &mut Criterion) {
    svd(c);
    opa(c);
    epoch(c);
    ranking(c);
}

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd_square");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in [5, 20, 50] {
        let a = gaussian_matrix(k, k, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(k), &a, |b, a| {
            b.iter(|| svd_square(black_box(a)).unwrap())
        });
    }
    group.finish();
}

fn opa(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_opa");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, k) in [(100, 20), (1000, 20)] {
        let h = gaussian_matrix(n, k, &mut rng);
        let t = gaussian_matrix(n, k, &mut rng);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_function(BenchmarkId::from_parameter(format!("{n}x{k}")), |b| {
            b.iter(|| solve_opa(black_box(&h), black_box(&t)).unwrap())
        });
    }
    group.finish();
}

fn epoch(c: &mut Criterion) {
    let data = random_kg(2000, 20, (20_000, 100, 100), 3).unwrap();
    let groups = build_groups(&data.store);
    let config = TrainConfig {
        dim: 200,
        sub_dim: 20,
        ..TrainConfig::default()
    };
    let mut state = TrainState::new(&config, data.n_entities(), data.n_relations()).unwrap();
    let mut group = c.benchmark_group("epoch");
    group.sample_size(10);
    group.throughput(Throughput::Elements(data.store.train.len() as u64));
    group.bench_function("fullbatch_d200", |b| {
        b.iter(|| state.train_epoch_fullbatch(&config, &groups).unwrap())
    });
    group.finish();
}

fn ranking(c: &mut Criterion) {
    let data = random_kg(2000, 20, (20_000, 200, 200), 4).unwrap();
    let config = TrainConfig {
        dim: 200,
        sub_dim: 20,
        ..TrainConfig::default()
    };
    let mut state = TrainState::new(&config, data.n_entities(), data.n_relations()).unwrap();
    state.refresh_relations(&build_groups(&data.store)).unwrap();
    let filter = build_filter(&data.store);
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    group.throughput(Throughput::Elements(2 * data.store.test.len() as u64));
    group.bench_function("test_d200", |b| {
        b.iter(|| {
            evaluate(
                &state.entities,
                &state.relations,
                &data.store.test,
                &filter,
                ScoreKind::Squared,
            )
            .unwrap()
        })
    });
    group.finish();
}
