//! Benchmark-only crate; see `benches/laboratory.rs`.
