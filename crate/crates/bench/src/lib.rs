//! Benchmarks for the core pipeline live under `benches/`.
