use criterion::{criterion_group, criterion_main, Criterion};
use qbound_core::reports::{figure_series, table1, GridSpec, SeriesOptions, TABLE1_Q, TABLE1_ROWS};

fn reports(c: &mut Criterion) {
    c.bench_function("table1", |b| b.iter(|| table1(TABLE1_ROWS, TABLE1_Q)));
    let spec: GridSpec =
        "method = wr, wor\np = log:1e-4:1:40\nk = 100, 1000, 10000\nq = lin:1:10:46\n"
            .parse()
            .unwrap();
    c.bench_function("figure_series_bounds_only", |b| {
        b.iter(|| figure_series(&spec, SeriesOptions::default()))
    });
}

criterion_group!(benches, reports);
criterion_main!(benches);
