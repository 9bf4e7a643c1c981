use criterion::{criterion_group, criterion_main, Criterion};
use qbound_core::montecarlo::{run_simulation, SimulationConfig};
use qbound_core::{PopulationSpec, SampleDesign};

fn simulation(c: &mut Criterion) {
    let pop = PopulationSpec::new(1_000_000, 5000).unwrap();
    let mut group = c.benchmark_group("simulation_10k_trials");
    group.sample_size(20);
    for design in [
        SampleDesign::with_replacement(1000).unwrap(),
        SampleDesign::without_replacement(1000, 1_000_000).unwrap(),
    ] {
        let cfg = SimulationConfig::new(pop, design, 2.0, 10_000, 1).unwrap();
        group.bench_function(design.method().tag(), |b| b.iter(|| run_simulation(&cfg)));
    }
    group.finish();
}

criterion_group!(benches, simulation);
criterion_main!(benches);
