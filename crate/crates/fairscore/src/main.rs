use std::process::ExitCode;

use clap::Parser;

use fairscore::cli::{run, Command};

/// Group-fairness score transformation: fit a low-dimensional dual model and
/// apply the closed-form score transform to CSV datasets.
#[derive(Parser)]
#[command(name = "fairscore", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
