use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use pglearn::cli::{dispatch, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
