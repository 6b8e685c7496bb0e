//! Library half of the `omniobs` binary: config parsing and run execution,
//! exposed so integration tests can drive experiments in-process.

pub mod config;
pub mod run;
