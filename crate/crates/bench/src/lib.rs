//! Criterion benchmarks for qbound-core; see `benches/`.
