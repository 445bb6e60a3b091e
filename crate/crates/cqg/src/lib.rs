//! File formats, checkpoints and the `cqg` command-line tool on top of
//! [`cqg_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod log;
pub mod manifest;
pub mod report;

pub use error::{Error, Result};
