//! Criterion benchmarks for the measurement pipeline live under `benches/`.
