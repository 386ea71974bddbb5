//! Command line driver: one subcommand per experiment, each writing a JSON report.

pub mod args;
pub mod config;
pub mod density;
pub mod experiments;
pub mod fixtures;
pub mod output;

use std::ffi::OsString;

use clap::Parser;

use crate::args::Cli;
use crate::config::{exit, parse_config, CliError};

/// Runs the CLI on `argv` and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::PASS };
        }
    };
    match execute(&cli) {
        Ok(pass) => {
            if pass {
                exit::PASS
            } else {
                exit::FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let config = parse_config(cli)?;
    let outcome = experiments::run_experiment(&config)?;
    let report = output::write_outcome(&config, &outcome)?;
    println!(
        "{} {}: {}",
        config.params.kind(),
        if outcome.pass { "PASS" } else { "FAIL" },
        report.display()
    );
    Ok(outcome.pass)
}
