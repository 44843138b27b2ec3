//! Benchmarks for `rehab-core`; see `benches/`.
