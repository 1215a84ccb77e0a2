//! Benchmarks for the analysis kernels; see `benches/kernels.rs`.
