//! `igflow`: run Hamilton, gradient and discrete KL flows, export derived
//! quantities, and run the invariant checks.
//!
//! Exit codes: 0 success, 1 failed checks, 2 configuration or input error,
//! 3 integration failure.

mod args;
mod commands;
mod error;
mod table;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Verify(a) => commands::verify(a),
        Command::ExportPlotdata(a) => commands::export_plotdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("igflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
