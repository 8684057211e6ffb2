//! Library surface of the `plume` command-line tool: asset catalogs, the
//! deterministic generation pipeline, and the subcommand drivers.

pub mod catalog;
pub mod commands;
pub mod config;
pub mod pipeline;
