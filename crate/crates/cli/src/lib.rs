//! Library side of the `fdo-mlp` command-line tool: configuration layering,
//! the subcommands and their file outputs.

pub mod commands;
pub mod config;
pub mod output;
