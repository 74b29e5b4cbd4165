//! `lab`: command-line front end of the sparse SSK laboratory.
//!
//! Exit codes: 0 success, 1 experiment abort or runtime failure, 2 usage
//! error. Errors go to stderr as `error[usage|abort|runtime]: message`.

mod config;
mod dispatch;
mod error;
mod plot;

use clap::error::ErrorKind;
use clap::Parser;

use config::{resolve, Cli};
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli, std::env::var("LAB_THREADS").ok())?;
    let plan = dispatch::validate(&cfg)?;
    dispatch::prepare_output(&cfg)?;
    dispatch::dispatch(&cfg, plan)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let text = e.to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("error[usage]: {text}");
            std::process::exit(2);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("error[{}]: {e}", e.kind());
        std::process::exit(e.exit_code());
    }
}
