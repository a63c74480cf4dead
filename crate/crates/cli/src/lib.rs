//! Batch front end for the `mar_core` toolkit.
//!
//! Every command reads a [`RunConfig`], processes cases in parallel with
//! pure per-case functions, and writes grids plus a JSON manifest under
//! the output directory. Errors map to exit codes through
//! [`CliError::exit_code`].

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod preview;
pub mod store;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
