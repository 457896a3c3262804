//! Configuration, artifact handling and subcommands for the `flep` binary.

pub mod artifacts;
pub mod config;
pub mod run;
