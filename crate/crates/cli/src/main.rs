use std::panic;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use mar_cli::app::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("marct: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // The panic message is already on stderr.
        Err(_) => ExitCode::from(3),
    }
}
