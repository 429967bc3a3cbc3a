mod commands;
mod error;
mod output;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use commands::Command;
use error::CliError;

/// Regularized trigonometric regression: fitting, error bounds and Monte Carlo studies.
#[derive(Debug, Parser)]
#[command(name = "trigreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("TRIGREG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "TRIGREG_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|_| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
