//! File formats, configuration and the command-line front end for
//! `wkit-core`.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use wkit_core as core;
