//! `nterm`: command-line front end for the n-term approximation library.
//!
//! Exit status 0 on success, 2 for invalid input, 1 for failed computations.
//! Failures print a single JSON record on stderr.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use commands::{Budgets, Output};
use config::{Command, Flags, Format};

const BUDGET_ENV: &str = "NTERM_BUDGET_POINTS";

#[derive(Debug, Parser)]
#[command(
    name = "nterm",
    version,
    about = "n-term approximation characteristics of weighted Fourier classes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Compute(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Compute(_) => "compute",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Compute(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

fn budget_override() -> Result<Option<u64>, CliError> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(points) if points > 0 => Ok(Some(points)),
            _ => Err(CliError::Parse(format!(
                "{BUDGET_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Parse(format!("{BUDGET_ENV}: {e}"))),
    }
}

/// Flags after merging the config file, checked against the command.
fn resolve(command: &Command) -> Result<Flags, CliError> {
    let cli = command.flags();
    let flags = match &cli.config {
        Some(path) => config::merge(cli, &config::load_config(path)?),
        None => cli.clone(),
    };
    config::check_accepted(command, &flags)?;
    commands::validate(&flags)?;
    Ok(flags)
}

fn render(command: &Command, flags: &Flags, budget: Option<u64>, budgets: Budgets, out: Output) -> String {
    match flags.format.unwrap_or(Format::Csv) {
        Format::Csv => out.csv,
        Format::Json => {
            let mut doc = json!({
                "metadata": {
                    "command": command.name(),
                    "flags": flags,
                    "budget_points": budget,
                    "budgets": budgets,
                    "version": env!("CARGO_PKG_VERSION"),
                },
            });
            if let (Some(target), serde_json::Value::Object(body)) = (doc.as_object_mut(), out.body) {
                target.extend(body);
            }
            let mut text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
            text.push('\n');
            text
        }
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let flags = resolve(command)?;
    let budget = budget_override()?;
    let budgets = Budgets::from_override(budget);
    if let Some(threads) = flags.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Compute(format!("thread pool: {e}")))?;
    }
    let out = commands::run(command, &flags, budgets)?;
    let text = render(command, &flags, budget, budgets, out);
    match &flags.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Compute(format!("cannot write stdout: {e}"))),
    }
}

fn report(err: &CliError) -> ExitCode {
    let record = json!({ "error": { "kind": err.kind(), "message": err.message() } });
    eprintln!("{record}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Parse(e.to_string().trim_end().to_string())),
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
