//! Benchmarks for `sisd-core` live in `benches/`; this crate has no API.
