//! Command-line driver: configuration, the four subcommands and their output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use args::{BuildArgs, Cli, Command};
pub use commands::{cmd_analyze, cmd_build, cmd_entropy, cmd_verify, IfsFile, Outcome};
pub use config::Config;
pub use error::CliError;
