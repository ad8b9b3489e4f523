//! Command-line front end: configuration merging, method dispatch and output
//! files.

pub mod config;
pub mod runner;

pub use config::{Format, MethodArg, ModeArg, RunArgs, RunConfig};
pub use runner::{execute, run_method, MethodOutput, Report, SummaryRow};
