mod args;
mod chart;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use postln_lens::Error;

use commands::Status;

/// 1 is reserved for verification failures.
fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Format(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("lenskit: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
