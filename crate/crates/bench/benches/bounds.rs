use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qbound_core::bounds::{confidence_wor, confidence_wr};
use qbound_core::solver::{min_sample_size, q_at_confidence, PlanQuery};
use qbound_core::{InequalitySet, SamplingMethod};

fn bounds(c: &mut Criterion) {
    c.bench_function("confidence_wr", |b| {
        b.iter(|| confidence_wr(black_box(0.005), 1000, 2.0, InequalitySet::WITH_HOEFFDING))
    });
    c.bench_function("confidence_wor", |b| {
        b.iter(|| {
            confidence_wor(
                black_box(0.005),
                10_000,
                1_000_000,
                2.0,
                InequalitySet::WITHOUT_REPLACEMENT,
            )
        })
    });
}

fn solver(c: &mut Criterion) {
    let k_query = PlanQuery::new(SamplingMethod::WithReplacement, 0.001, None, 0.95).with_q(2.0);
    c.bench_function("min_sample_size", |b| {
        b.iter(|| min_sample_size(black_box(&k_query)))
    });
    let q_query = PlanQuery::new(
        SamplingMethod::WithoutReplacement,
        0.01,
        Some(1_000_000),
        0.95,
    )
    .with_k(5000);
    c.bench_function("q_at_confidence", |b| {
        b.iter(|| q_at_confidence(black_box(&q_query)))
    });
}

criterion_group!(benches, bounds, solver);
criterion_main!(benches);
