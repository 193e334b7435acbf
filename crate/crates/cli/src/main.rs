use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match toricsim_cli::run(toricsim_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
