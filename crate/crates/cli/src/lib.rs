//! Experiment orchestration for the hard-rod simulator: JSON run configs,
//! reproducible multi-chain runs with CSV/JSON outputs, gzip configuration
//! traces, and SVG plots.

pub mod config;
pub mod plot;
pub mod run;
pub mod trace;

/// Schema version stamped into every JSON artifact this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
