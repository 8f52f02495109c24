//! Criterion benchmarks for the link prediction core live under `benches/`.
