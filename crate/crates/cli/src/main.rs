use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = lowres_match_cli::Cli::parse();
    match lowres_match_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
