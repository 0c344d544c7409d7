//! Command-line driver for rare/weak detection experiments.

pub mod app;
pub mod config;
pub mod emit;
pub mod error;
pub mod grid;

pub use app::{configure_threads, run_with};
pub use error::{CliError, Result};
