//! File formats, PNG IO, configuration and the command line for
//! [`uwda_core`].

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod formats;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
