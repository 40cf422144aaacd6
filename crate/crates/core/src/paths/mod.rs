//! Euler–Maruyama path ensembles for the SDE with generator `L` and the
//! Monte Carlo checks that compare them against grid flows.

mod checks;
mod ensemble;
mod functionals;
pub mod io;
mod laws;
mod wasserstein;

pub use checks::{
    bias_allowance, doob_empirical, initial_law_check, lemma_ek1_check, marginal_check, martingale_check, martingale_suite,
    suite_verdict,
    CheckReport, Sided, SuiteVerdict,
};
pub use ensemble::{simulate, sqrt_diffusion, PathEnsemble, SimConfig, Tracked};
pub use functionals::{GFunctional, Observation};
pub use laws::{grid_cdf, InitialLaw};
pub use wasserstein::{ks_statistic, w1_samples, w1_samples_vs_grid};

use crate::coeffs::CoeffError;
use crate::fpk::FpkError;

#[derive(Debug, thiserror::Error)]
pub enum PathsError {
    #[error("diffusion matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("diffusion matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("{blown} of {n_paths} paths blew up, above the 0.1% allowance")]
    NonFinite { blown: usize, n_paths: usize },
    #[error("functional {label} reads the path at {at} after s = {s}")]
    NotAdapted { label: String, at: f64, s: f64 },
    #[error("time {t} is not a recorded time of the ensemble")]
    TimeNotCovered { t: f64 },
    #[error("tracked integral for '{0}' was not recorded during simulation")]
    NotTracked(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed ensemble file: {0}")]
    Format(String),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Flow(#[from] FpkError),
}
