use std::process::ExitCode;

use clap::Parser;
use clustcv_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match clustcv_cli::execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
