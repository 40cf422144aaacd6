//! Finite-volume solution of the forward equation on a truncated grid and
//! checks of its weak formulation.

mod analytic;
mod flow;
mod grid;
pub mod io;
mod solver;
mod weak;

use thiserror::Error;

use crate::coeffs::CoeffError;

pub use analytic::{analytic_flow, AnalyticParams};
pub use flow::{expectation_of, l1_distance, MarginalFlow};
pub use grid::{Boundary, Grid};
pub use solver::{solve_cauchy, solve_cauchy_with_stats, SolveStats};
pub use weak::{flow_integral, weak_residual, WeakResidual};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FpkError {
    #[error("time step collapsed to {dt:e} at t={t}")]
    CflBreakdown { t: f64, dt: f64 },
    #[error("mass drifted to {mass} at t={t}")]
    MassLoss { t: f64, mass: f64 },
    #[error("flooring added {amount:e} mass in one step at t={t}")]
    NegativeDensityExcess { t: f64, amount: f64 },
    #[error("invalid initial density: {0}")]
    InvalidInitial(String),
    #[error("field has dimension {field}, grid has {grid}")]
    DimensionMismatch { field: usize, grid: usize },
    #[error("support of test function '{label}' reaches the grid boundary")]
    SupportEscape { label: String },
    #[error("unknown analytic oracle '{0}'")]
    UnknownOracle(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("t={t} outside the flow's time range [{from}, {to}]")]
    TimeNotCovered { t: f64, from: f64, to: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed flow file: {0}")]
    Format(String),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

impl From<std::io::Error> for FpkError {
    fn from(e: std::io::Error) -> Self {
        FpkError::Io(e.to_string())
    }
}
