//! Scenario files, reports and the commands behind the `mmt` binary.

pub mod commands;
pub mod config;
pub mod report;
