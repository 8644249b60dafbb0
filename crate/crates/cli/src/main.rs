//! `mpec`: batch runner for noise learning, mitigation validation and
//! error-cancelled estimation on dynamic circuits.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpec::Error;
use serde_json::json;

use crate::config::Experiment;

#[derive(Parser)]
#[command(name = "mpec", version, about = "Error cancellation for dynamic circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Learn noise models of PEC layers.
    Learn,
    /// Compare mitigated and unmitigated fidelity decays.
    Validate,
    /// Estimate observables under the full, unitary-only and raw arms.
    Mitigate,
    /// Dump a Pauli transfer matrix.
    Ptm,
    /// Rewrite classically-controlled CNOTs into Clifford conditionals.
    Decompose,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Learn => "learn",
            Command::Validate => "validate",
            Command::Mitigate => "mitigate",
            Command::Ptm => "ptm",
            Command::Decompose => "decompose",
        }
    }
}

/// Failure reported as JSON with a process exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError {
            code: 2,
            kind: "config",
            message,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Budget { .. } => (3, "budget"),
            Error::Unfittable(_) | Error::NonFinite(_) | Error::EmptySamples => (4, "numerical"),
            Error::Schema(_) => (2, "schema"),
            _ => (2, "config"),
        };
        CliError {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config is required".into()))?;
    let exp = Experiment::load(path, cli.seed, cli.out.clone())?;
    let written = match cli.command {
        Command::Learn => commands::learn(&exp)?,
        Command::Validate => commands::validate(&exp)?,
        Command::Mitigate => commands::mitigate(&exp)?,
        Command::Ptm => commands::ptm(&exp)?,
        Command::Decompose => commands::decompose(&exp)?,
    };
    Ok(json!({
        "status": "ok",
        "command": cli.command.name(),
        "seed": exp.seed,
        "outputs": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.workers {
        Some(0) => Err(CliError::config("--workers must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::config(format!("cannot start worker pool: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"status": "error", "error": e.kind, "message": e.message, "exit_code": e.code})
            );
            ExitCode::from(e.code)
        }
    }
}
