use std::process::ExitCode;

use clap::Parser;
use ionchain::cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.execute() {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ionchain {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
