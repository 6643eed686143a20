//! Batch front-end for the `dtpc` tool.
//!
//! Each subcommand takes a [`RunConfig`], runs one computation and returns a
//! [`ResultDocument`]: a TOML file holding the tool version, wall time, the
//! fully resolved config and the result payload. Feeding the echoed config
//! back in reproduces the payload byte for byte.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod commands;
pub mod config;

pub use commands::{cmd_capacity, cmd_idcode, cmd_spectrum, write_rates_csv, SpectrumRun};
pub use config::{EvalMethod, Flags, RunConfig, StateSpec};

pub const TOOL: &str = "dtpc";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// The solver stopped early; the document holds its best iterate.
    #[error("capacity solver did not converge")]
    NotConverged { document: Option<Box<ResultDocument>> },
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    UnsupportedBound(String),
    #[error("{0}")]
    Construction(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::NotConverged { .. } => 3,
            CliError::Budget(_) => 4,
            CliError::UnsupportedBound(_) => 5,
            CliError::Construction(_) => 6,
        }
    }
}

impl From<dtpc_core::Error> for CliError {
    fn from(e: dtpc_core::Error) -> Self {
        use dtpc_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::SupportViolation { .. } | E::InfiniteDivergence(_) => {
                CliError::Validation(e.to_string())
            }
            E::NotConverged(_) => CliError::NotConverged { document: None },
            E::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            E::UnsupportedBound(_) => CliError::UnsupportedBound(e.to_string()),
            E::Construction(_) => CliError::Construction(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Capacity,
    Spectrum,
    Idcode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub wall_time_s: f64,
    pub config: RunConfig,
    pub payload: toml::Table,
}

impl ResultDocument {
    fn new<P: Serialize>(
        command: Command,
        config: &RunConfig,
        started: Instant,
        payload: &P,
    ) -> Result<Self, CliError> {
        let payload = toml::Table::try_from(payload).map_err(|e| CliError::Io(format!("payload: {e}")))?;
        Ok(Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            wall_time_s: started.elapsed().as_secs_f64(),
            config: config.clone(),
            payload,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Io(format!("document: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("result document: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The payload alone, as compared across reruns.
    pub fn payload_text(&self) -> Result<String, CliError> {
        toml::to_string(&self.payload).map_err(|e| CliError::Io(format!("payload: {e}")))
    }
}

/// Runs `command` with `config`.
pub fn run(command: Command, config: &RunConfig) -> Result<ResultDocument, CliError> {
    match command {
        Command::Capacity => cmd_capacity(config),
        Command::Spectrum => cmd_spectrum(config).map(|r| r.document),
        Command::Idcode => cmd_idcode(config),
    }
}
