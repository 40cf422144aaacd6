//! Numerical laboratory for Fokker–Planck–Kolmogorov equations and their
//! path-space (superposition) representations.

pub mod coeffs;
pub mod fpk;
pub mod linalg;
pub mod lyapunov;
pub mod mollify;
pub mod paths;
pub mod quad;
pub mod scalar;
pub mod testfn;

pub use scalar::Scalar;

/// Coefficient field in double precision.
pub type Field = coeffs::CoefficientField<f64>;
/// Coefficient field in single precision.
pub type Field32 = coeffs::CoefficientField<f32>;

/// Lyapunov function in double precision.
pub type Lyapunov = lyapunov::LyapunovSpec<f64>;
