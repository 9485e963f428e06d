//! File formats and command dispatch for the `camtf` tool.
//!
//! Exit codes: 0 success, 1 invalid input, 2 partial degeneracy (some output
//! rows could not be computed, or the geometry itself is degenerate),
//! 3 non-convergence (the report is still written).

pub mod commands;
pub mod config;
pub mod raster;
pub mod tables;

use std::ffi::OsString;

use clap::Parser;

pub use commands::{Cli, Outcome};
pub use config::CameraConfig;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::execute(cli) {
        Ok(outcome) => outcome.code(),
        Err(err) => {
            eprintln!("error: {err:#}");
            commands::error_code(&err)
        }
    }
}
