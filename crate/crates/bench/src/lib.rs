//! Criterion benchmarks for the engine library; see `benches/`.
