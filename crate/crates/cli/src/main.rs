use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtpc_cli::{cmd_capacity, cmd_idcode, cmd_spectrum, write_rates_csv, CliError, Flags, ResultDocument};

/// Capacity, information-density spectrum and identification codes for the
/// discrete-time Poisson channel.
#[derive(Parser)]
#[command(name = "dtpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve for capacity and the optimal input law, with a KKT certificate.
    Capacity(Flags),
    /// Monte Carlo spectrum of the information density under the optimal input.
    Spectrum(Flags),
    /// Build an identification code and evaluate its error probabilities.
    Idcode(Flags),
}

fn emit(doc: &ResultDocument, flags: &Flags) -> Result<(), CliError> {
    let text = doc.to_toml()?;
    match &flags.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let flags = match &cli.command {
        Sub::Capacity(f) | Sub::Spectrum(f) | Sub::Idcode(f) => f,
    };
    if let Some(workers) = flags.workers {
        if workers == 0 {
            return Err(CliError::Validation("workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let config = flags.to_config()?;
    let doc = match &cli.command {
        Sub::Capacity(_) => cmd_capacity(&config),
        Sub::Spectrum(_) => cmd_spectrum(&config).and_then(|run| {
            if let Some(path) = &flags.csv {
                write_rates_csv(path, &run.rates)?;
            }
            Ok(run.document)
        }),
        Sub::Idcode(_) => cmd_idcode(&config),
    };
    match doc {
        Ok(doc) => emit(&doc, flags),
        Err(CliError::NotConverged { document: Some(doc) }) => {
            emit(&doc, flags)?;
            Err(CliError::NotConverged { document: None })
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dtpc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
