use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use adf_core::ann::{brute_force_search, search, search_batch, train, KMeansConfig, SearchParams};
use adf_core::{EcefCoord, Exec};

fn cloud(n: usize, seed: u64) -> Vec<EcefCoord> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let base = EcefCoord::new(-1_334_000.0, 5_327_000.0, 3_236_000.0);
    (0..n)
        .map(|_| {
            base + EcefCoord::new(
                r.random_range(0.0..200_000.0),
                r.random_range(0.0..200_000.0),
                r.random_range(0.0..10_000.0),
            )
        })
        .collect()
}

fn single_query(c: &mut Criterion) {
    let pts = cloud(100_000, 1);
    let idx = train(&pts, 316, &KMeansConfig::with_seed(1)).unwrap();
    let q = cloud(1, 2)[0];
    let mut g = c.benchmark_group("knn_100k");
    for nprobe in [4, 16, 64] {
        g.bench_function(BenchmarkId::new("ivf", nprobe), |b| {
            b.iter(|| search(&idx, &q, &SearchParams::new(100, nprobe)).unwrap())
        });
    }
    g.bench_function("brute", |b| b.iter(|| brute_force_search(&pts, &q, 100).unwrap()));
    g.finish();
}

fn batch(c: &mut Criterion) {
    let pts = cloud(100_000, 3);
    let idx = train(&pts, 316, &KMeansConfig::with_seed(3)).unwrap();
    let qs = cloud(2_000, 4);
    let params = SearchParams::new(100, 16);
    let mut g = c.benchmark_group("search_batch");
    g.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| search_batch(&idx, &qs, &params, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, single_query, batch);
criterion_main!(benches);
