//! Benchmarks live in `benches/`; run them with `cargo bench -p biphoton-bench`.
