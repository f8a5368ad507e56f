use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = bridgedpi::cli::Cli::parse();
    match bridgedpi::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
