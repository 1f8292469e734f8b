//! Configuration parsing, binary field files and the subcommand drivers
//! behind the `spings` binary.

pub mod config;
pub mod fieldfile;
pub mod output;
pub mod runner;
