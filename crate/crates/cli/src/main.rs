//! `knperc`: command-line access to the k-neighbor percolation toolkit.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 when an enumeration
//! budget (`KNPERC_BUDGET`) is exceeded, 1 on I/O failures.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<knperc::Error>() {
        Some(e) if e.is_budget() => 3,
        Some(_) => 2,
        None if err.downcast_ref::<commands::UsageError>().is_some() => 2,
        None => 1,
    }
}
