//! Criterion benchmarks for the analysis, certification and solve pipeline
//! live in `benches/`.
