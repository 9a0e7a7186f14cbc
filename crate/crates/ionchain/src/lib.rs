//! Configuration, file formats and command pipeline for the `ionchain`
//! binary. The numerics live in `ionchain-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod files;
pub mod pipeline;

pub use crate::config::RunConfig;
pub use crate::error::CliError;
pub use crate::pipeline::{run, Command, Context};
