//! Criterion benchmarks for the solvers live in `benches/`; this crate has no library code.
