use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use patterncard::canonhash::{pattern_hash, PatternFeatures};
use patterncard::hierarchy::{EstimatorStore, StoreConfig};
use patterncard::learners::{fit_gbdt, GbdtParams};
use patterncard::querygraph::parse_sql;
use patterncard_bench::{star_query, training_set};
use std::hint::black_box;

fn hashing(c: &mut Criterion) {
    let dag = star_query();
    let full = PatternFeatures::full();
    c.bench_function("pattern_hash/star4", |b| b.iter(|| pattern_hash(black_box(&dag), &full)));
}

fn estimate(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate");
    for rows in [10usize, 100, 1000] {
        let store = EstimatorStore::new(StoreConfig::default(), None).unwrap();
        for i in 0..rows {
            let q = parse_sql(&format!("SELECT COUNT(*) FROM t WHERE t.x > {}", i % 500), None).unwrap();
            store.observe(&q, (1000 - i % 500) as u64, None).unwrap();
        }
        let probe = parse_sql("SELECT COUNT(*) FROM t WHERE t.x > 250", None).unwrap();
        let a = store.analyze(&probe).unwrap();
        // The first estimate fits the cached model.
        store.estimate_analyzed(&a, 1);
        group.bench_with_input(BenchmarkId::new("cached", rows), &a, |b, a| {
            b.iter(|| store.estimate_analyzed(black_box(a), 1))
        });
        group.bench_with_input(BenchmarkId::new("analyze", rows), &probe, |b, q| {
            b.iter(|| store.analyze(black_box(q)).unwrap())
        });
    }
    group.finish();
}

fn gbdt(c: &mut Criterion) {
    let mut group = c.benchmark_group("gbdt_fit");
    group.sample_size(20);
    for n in [100usize, 1000, 5000] {
        let set = training_set(n, 4);
        group.bench_with_input(BenchmarkId::from_parameter(n), &set, |b, s| {
            b.iter(|| fit_gbdt(black_box(s), &GbdtParams::default(), None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, hashing, estimate, gbdt);
criterion_main!(benches);
