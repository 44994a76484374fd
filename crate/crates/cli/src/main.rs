use clap::error::ErrorKind;
use clap::Parser;
use gemac_cli::args::Cli;
use gemac_cli::{output_path, run, CliError};
use std::io::Write;
use std::process::ExitCode;

fn execute(cli: &Cli) -> Result<(), CliError> {
    let rendered = run(cli)?;
    match output_path(cli)? {
        Some(p) => std::fs::write(&p, &rendered.text)?,
        None => std::io::stdout().write_all(rendered.text.as_bytes())?,
    }
    match rendered.validation_failed {
        Some(ids) => {
            let ids: Vec<String> = ids.iter().map(u8::to_string).collect();
            Err(CliError::Validation(format!("criteria {} failed", ids.join(", "))))
        }
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
