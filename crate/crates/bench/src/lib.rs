//! Criterion benchmarks for the roadcrack pipeline live in `benches/`.
