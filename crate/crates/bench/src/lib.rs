//! Criterion benchmarks for `mpcert`; see `benches/`.
