//! Criterion benchmarks for `splq-core` live in `benches/`.
