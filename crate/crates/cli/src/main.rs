use std::process::ExitCode;

use clap::error::ErrorKind;
use cookiewalk_cli::{emit, parse_args, run, ParseFailure, EXIT_OK, EXIT_USAGE};

fn main() -> ExitCode {
    let config = match parse_args(std::env::args_os()) {
        Ok(config) => config,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK as u8),
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
        Err(ParseFailure::Cli(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = run(&config).and_then(|artifact| {
        emit(&config, &artifact)?;
        Ok(artifact.status)
    });
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
