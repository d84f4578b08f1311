//! Criterion benchmarks for the recommender pipeline; see `benches/`.
