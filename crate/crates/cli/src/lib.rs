//! Scenario runner: reads a JSON scenario, solves the flow, simulates the
//! path ensemble, runs the requested checks and writes the report.

pub mod config;
pub mod emit;
pub mod report;
pub mod scenario;

pub use config::{CheckConfig, CheckGroup, ScenarioConfig};
pub use emit::{emit_report, list_builtins, Format};
pub use report::VerificationReport;
pub use scenario::{run_scenario, run_scenario_with, Filter, Outcome};

use thiserror::Error;

/// Process exit status when every check passed.
pub const EXIT_OK: i32 = 0;
/// Some check failed; the report is complete.
pub const EXIT_CHECKS_FAILED: i32 = 1;
/// Invalid configuration, I/O failure or a structural numerical error.
pub const EXIT_STRUCTURAL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("I/O failure: {0}")]
    Io(String),
    #[error(transparent)]
    Coeff(#[from] fpklab::coeffs::CoeffError),
    #[error(transparent)]
    Fpk(#[from] fpklab::fpk::FpkError),
    #[error(transparent)]
    Paths(#[from] fpklab::paths::PathsError),
    #[error(transparent)]
    Lyapunov(#[from] fpklab::lyapunov::LyapunovError),
    #[error(transparent)]
    Mollify(#[from] fpklab::mollify::MollifyError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
