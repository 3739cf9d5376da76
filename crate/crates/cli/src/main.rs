//! `hypctl` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 config error, 3 invariant or numerical
//! failure, 4 uncontrollable verdict.

mod args;
mod artifacts;
mod commands;
mod run_config;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = args::Cli::parse();
    ExitCode::from(commands::execute(&cli.command))
}
