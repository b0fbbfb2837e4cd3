//! The `bribery` command line: analyze, sweep-start, sweep-reward, validate.

pub mod args;
pub mod commands;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use crate::args::{Cli, Command};
pub use crate::error::CliError;

/// Parses `argv` and runs the command. Returns the process exit code;
/// failures leave a one-line JSON record on `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let e = CliError::Usage(e.to_string().trim_end().to_string());
            let _ = writeln!(err, "{}", e.record());
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => commands::analyze(a, out, err),
        Command::SweepStart(a) => commands::sweep_start(a, out, err),
        Command::SweepReward(a) => commands::sweep_reward(a, out, err),
        Command::Validate(a) => commands::validate(a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.record());
            e.exit_code()
        }
    }
}
