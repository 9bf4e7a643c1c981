use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qbound_core::exact::exact_confidence;
use qbound_core::{PopulationSpec, SampleDesign};

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_confidence");
    for &(n, card, k) in &[
        (1_000_000u64, 5000u64, 1000u64),
        (1_000_000, 5000, 100_000),
        (1_000_000_000, 300_000_000, 100_000),
    ] {
        let pop = PopulationSpec::new(n, card).unwrap();
        for design in [
            SampleDesign::with_replacement(k).unwrap(),
            SampleDesign::without_replacement(k, n).unwrap(),
        ] {
            let id = BenchmarkId::new(design.method().tag(), format!("n={n},C={card},k={k}"));
            group.bench_with_input(id, &(pop, design), |b, (pop, design)| {
                b.iter(|| exact_confidence(black_box(pop), design, 1.1))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, exact);
criterion_main!(benches);
