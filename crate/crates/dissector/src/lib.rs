//! File formats, configuration, command line and live control server
//! built on `dissector-core`.

pub mod checkpoints;
pub mod cli;
pub mod config;
pub mod error;
pub mod mapfile;
pub mod policyfile;
pub mod presetfile;
pub mod protocol;
pub mod schedule;
pub mod server;
pub mod tracefile;

pub use error::{Error, Result};
