//! Benchmarks live under the `benches` directory.
