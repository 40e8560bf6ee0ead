//! Scenario loading and the `check`, `solve` and `simulate` commands.

pub mod output;
pub mod run;
pub mod scenario;

use std::path::PathBuf;

pub use run::{exit_code, run_files, run_scenario, Command, Flags, Format, Outcome};
pub use scenario::{load_scenario, parse_scenario, write_scenario, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] quasireg_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}
