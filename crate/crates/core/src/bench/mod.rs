//! Benchmark harness: registry, empirical oracles, flop model and reports.

pub mod abssum;
pub mod flops;
pub mod registry;
pub mod report;
pub mod sampling;
