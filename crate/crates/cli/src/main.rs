use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match roadcrack_cli::run(roadcrack_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
