//! Space-time mollification of a flow: the time shift `μ^δ`, the kernel
//! `h_ε`, the smoothed density `σ^ε`, the coefficients `β_ε`, `α_ε`, the
//! matrix `𝒜_ε`, the operator `𝓛_ε`, and a check that `σ^ε` solves the
//! mollified forward equation.

mod kernel;
mod system;
mod verify;

use thiserror::Error;

use crate::coeffs::CoeffError;
use crate::fpk::FpkError;
use crate::quad::QuadratureError;

pub use kernel::{eta, make_kernel, zeta, zeta_derivative, MollifierKernel};
pub use system::{
    apply_mollified_l, mollified_coeffs, mollify_flow, shift_flow, DominatingTerms, MollifiedPoint, MollifiedSystem,
    SmoothedDensity,
};
pub use verify::{verify_mollified, MollifyReport};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MollifyError {
    #[error("invalid smoothing parameters: {0}")]
    InvalidEpsilon(String),
    #[error("flow horizon {have} is shorter than the required {need}")]
    HorizonTooShort { need: f64, have: f64 },
    #[error("∫σ^ε(t,·) = {mass} at t={t}")]
    NormalizationDrift { t: f64, mass: f64 },
    #[error("𝒜_ε not positive semidefinite at t={t}, x={x:?} (min eigenvalue {min_eig:e})")]
    NotPsd { t: f64, x: Vec<f64>, min_eig: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("support of test function '{label}' reaches the grid boundary")]
    SupportEscape { label: String },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Flow(#[from] FpkError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}
