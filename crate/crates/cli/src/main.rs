use std::process::ExitCode;

use clap::Parser;

use savcd_cli::error::exit_code_for;
use savcd_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match savcd_cli::commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}
