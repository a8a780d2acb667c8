//! Experiment driver: single solves with JSON/CSV reports and the timing and
//! accuracy tables.

pub mod app;
pub mod args;
pub mod bench;
pub mod error;
pub mod format;
pub mod solve;

pub use error::{CliError, CliResult};
