use std::process::ExitCode;

use clap::Parser;
use cqg::cli::{run, Cli};
use cqg::log;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::emit(log::Level::Error, &[("error", &e)]);
            ExitCode::from(e.exit_code())
        }
    }
}
