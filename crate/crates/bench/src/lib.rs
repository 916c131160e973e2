//! Benchmarks for `isovol`; see `benches/`.
