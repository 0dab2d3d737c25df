//! Criterion benchmarks for the momentflow kernels live in `benches/`.
