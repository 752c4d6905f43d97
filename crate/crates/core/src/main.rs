use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use mmfusion::cli::{diagnostic, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().find(|l| !l.trim().is_empty()).unwrap_or("error: bad usage"));
            return ExitCode::from(2);
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", diagnostic(&e));
            ExitCode::FAILURE
        }
    }
}
