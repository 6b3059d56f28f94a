//! Library half of the `l0logit` command-line tool: the sweep harness and
//! the JSON record/report schemas, kept as a library so tests and other
//! tools can drive benchmarks in-process.

pub mod bench;
pub mod commands;
pub mod error;
pub mod records;
