//! File formats, run configuration and command implementations for the
//! `simreal` command-line tool.
//!
//! The numerics live in [`simreal_core`]; this crate reads and writes CSV and
//! JSON, resolves the run configuration, and maps failures to exit codes.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod history_io;

pub use error::{CliError, ExitCode};
