//! `opiqsdc`: rate curves, optimisation, pulse simulation and frame-coding
//! demos from the command line.
//!
//! Exit codes: 0 on success (null results included), 2 for usage and config
//! errors, 3 when a computation fails or a run ends in a failed outcome.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod error;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use opiqsdc::SystemParams;

use args::{Cli, Command, CONFIG_ENV};
use error::{CliError, CliResult};

fn resolve_params(cli: &Cli) -> CliResult<SystemParams> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    let mut params = SystemParams::default();
    if let Some(path) = path {
        let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        params
            .apply_config(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    }
    for assignment in &cli.params {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got `{assignment}`")))?;
        params
            .set(key.trim(), value.trim())
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(params)
}

fn run(cli: &Cli) -> CliResult<()> {
    let run = match &cli.command {
        Command::Replay(a) => commands::replay(a)?,
        command => commands::execute(command, &resolve_params(cli)?)?,
    };
    let text = manifest::to_json(&run.stdout);
    if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
        // a closed pipe (`| head`) is not an error worth reporting
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(CliError::io("<stdout>", e));
        }
    }
    match run.failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("opiqsdc: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
