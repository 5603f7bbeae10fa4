//! This crate only hosts the criterion benchmarks in `benches/`; there is no
//! library code. Run them with `cargo bench -p sts-bench`.
