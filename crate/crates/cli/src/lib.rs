//! Command-line front end for `formfield`: JSON scenario files, run and
//! compare commands, and CSV/SVG/JSON output.

pub mod commands;
pub mod config;
pub mod export;
pub mod json;
pub mod report;

pub use commands::Status;
pub use config::ConfigFile;
