//! Criterion benchmarks for the estimators and samplers; see `benches/`.
