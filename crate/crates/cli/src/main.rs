use std::process::ExitCode;

use clap::Parser;
use zenoamp::Error;

mod args;
mod commands;
mod manifest;

/// 2 usage, 3 numeric failure, 4 I/O.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Usage(_) | Error::Parse { .. } => 2,
        Error::Integration { .. } | Error::Singular => 3,
        Error::Io(_) => 4,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 4,
        Error::Csv(_) => 2,
        Error::Json(j) if j.is_io() => 4,
        Error::Json(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zenoamp: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
