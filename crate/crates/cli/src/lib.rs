//! Library side of the `lipbound` command-line tool.
//!
//! Each subcommand lives in [`commands`] and returns a [`CliError`] carrying
//! the process exit code. The benchmark harness in [`bench`] is usable
//! without going through the argument parser.

pub mod args;
pub mod bench;
pub mod commands;
pub mod error;
pub mod manifest;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command};
pub use error::{exit, CliError};
pub use manifest::RunManifest;

/// Parses `argv` (including the program name) and runs the selected
/// subcommand, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    let recorded: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match commands::dispatch(cli.command, recorded) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
