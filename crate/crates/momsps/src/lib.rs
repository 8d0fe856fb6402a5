//! File formats, the multi-seed harness, experiment presets and the CLI
//! around [`momsps_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod libsvm;
pub mod num;
pub mod presets;
pub mod problem_file;
pub mod records;
pub mod report;

pub use error::{Error, Result};
