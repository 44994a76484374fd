//! Library behind the `gemac` binary: argument and config handling, the
//! subcommands and the validation report.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod sweep;
pub mod table;
pub mod validate;

use args::{Cli, Command, Format};
use commands::Output;
use config::FileConfig;
pub use error::CliError;

/// Result of a command: rendered output and whether validation passed.
pub struct Rendered {
    pub text: String,
    pub validation_failed: Option<Vec<u8>>,
}

fn render(out: Output, format: Format) -> String {
    match (out, format) {
        (Output::Table(t), Format::Csv) => t.to_csv(),
        (Output::Table(t), Format::Json) => pretty(&t.to_json()),
        (Output::Json(v), _) => pretty(&v),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Runs the parsed command line and renders its output.
pub fn run(cli: &Cli) -> Result<Rendered, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(commands::DEFAULT_SEED);
    let format = cli.format.or(file.format).unwrap_or_default();
    let out = match &cli.command {
        Command::Capacity(a) => Output::Table(commands::capacity(a, &file, seed)?),
        Command::Threshold(a) => Output::Table(commands::threshold(a, &file)?),
        Command::Groups(a) => Output::Table(commands::groups(a, &file, seed)?),
        Command::Queueing(a) => Output::Table(commands::queueing(a, &file, seed)?),
        Command::Simulate(a) => {
            let r = commands::simulate(a, &file, seed)?;
            match format {
                Format::Csv => Output::Table(commands::sim_table(&r)),
                Format::Json => Output::Json(serde_json::to_value(&r).expect("serializable result")),
            }
        }
        Command::Validate(a) => {
            let ids = a.only.clone().or(file.validate.only.clone()).unwrap_or_else(|| (1..=11).collect());
            if let Some(bad) = ids.iter().find(|&&i| validate::criterion(i).is_none()) {
                return Err(CliError::Usage(format!("there is no criterion {bad}")));
            }
            let opts = validate::Options { seed: cli.seed.or(file.seed).unwrap_or(validate::DEFAULT_SEED), ..Default::default() };
            let report = validate::run(&ids, &opts);
            let text = match format {
                Format::Csv => report.render(),
                Format::Json => pretty(&serde_json::to_value(&report).expect("serializable report")),
            };
            let failed = report.failed_ids();
            return Ok(Rendered { text, validation_failed: (!failed.is_empty()).then_some(failed) });
        }
    };
    Ok(Rendered { text: render(out, format), validation_failed: None })
}

/// Writes to `--out` (or the config's `out`) when given, else returns the text for stdout.
pub fn output_path(cli: &Cli) -> Result<Option<std::path::PathBuf>, CliError> {
    if cli.out.is_some() {
        return Ok(cli.out.clone());
    }
    Ok(match &cli.config {
        Some(p) => FileConfig::load(p)?.out,
        None => None,
    })
}
