//! Coefficient fields `(A, b)` of the operator `L u = a^{ij} ∂_ij u + b^i ∂_i u`.

mod builtins;
pub mod densities;
mod growth;
mod polar;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg;
use crate::quad::QuadratureError;
use crate::scalar::Scalar;

pub use builtins::{builtin_field, builtin_names, ParamValue, Params};
pub use growth::{classify_growth, default_ladder, sample_points, BoundKind, GrowthReport, Violation};
pub use polar::{polar_vortex_integrals, CanonicalBump, PolarIntegrals, Profile};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CoeffError {
    #[error("non-finite coefficient in {field} at t={t}, x={x:?}")]
    NonFinite { field: String, t: f64, x: Vec<f64> },
    #[error("diffusion matrix of {field} not symmetric at x={x:?} (asymmetry {asymmetry:e})")]
    NotSymmetric { field: String, x: Vec<f64>, asymmetry: f64 },
    #[error("diffusion matrix of {field} not positive semidefinite at x={x:?} (min eigenvalue {min_eig:e})")]
    NotPsd { field: String, x: Vec<f64>, min_eig: f64 },
    #[error("point has dimension {got}, field expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown builtin field '{0}'")]
    UnknownBuiltin(String),
    #[error("bad parameters for '{name}': {reason}")]
    BadParams { name: String, reason: String },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Writes a coefficient at `(t, x)` into the output slice.
pub type CoeffFn<T> = Arc<dyn Fn(T, &[T], &mut [T]) + Send + Sync>;

/// A pair of evaluators for the diffusion matrix (row-major `d x d`) and the
/// drift vector.
#[derive(Clone)]
pub struct CoefficientField<T: Scalar = f64> {
    dim: usize,
    label: String,
    autonomous: bool,
    diffusion: CoeffFn<T>,
    drift: CoeffFn<T>,
}

impl<T: Scalar> fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField").field("dim", &self.dim).field("label", &self.label).finish()
    }
}

impl<T: Scalar> CoefficientField<T> {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        diffusion: impl Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
        drift: impl Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        assert!(dim > 0, "coefficient field needs dimension >= 1");
        Self { dim, label: label.into(), autonomous: true, diffusion: Arc::new(diffusion), drift: Arc::new(drift) }
    }

    /// `A = a I`, `b = drift(x)`.
    pub fn isotropic(
        dim: usize,
        label: impl Into<String>,
        a: T,
        drift: impl Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            dim,
            label,
            move |_, _, out: &mut [T]| {
                out.iter_mut().for_each(|v| *v = T::zero());
                for i in 0..dim {
                    out[i * dim + i] = a;
                }
            },
            drift,
        )
    }

    /// `A = 0`, `b = 0`.
    pub fn zero(dim: usize) -> Self {
        Self::isotropic(dim, "zero", T::zero(), |_, _, out: &mut [T]| out.iter_mut().for_each(|v| *v = T::zero()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Whether the coefficients ignore `t`. Fields are treated as autonomous
    /// unless marked with [`CoefficientField::time_dependent`].
    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn time_dependent(mut self) -> Self {
        self.autonomous = false;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Unchecked evaluation into caller buffers (`d*d` and `d` long).
    #[inline]
    pub fn diffusion_into(&self, t: T, x: &[T], out: &mut [T]) {
        (self.diffusion)(t, x, out)
    }

    #[inline]
    pub fn drift_into(&self, t: T, x: &[T], out: &mut [T]) {
        (self.drift)(t, x, out)
    }

    /// Checked evaluation of `(A(t,x), b(t,x))`.
    pub fn eval(&self, t: T, x: &[T]) -> Result<(Vec<T>, Vec<T>), CoeffError> {
        let d = self.dim;
        if x.len() != d {
            return Err(CoeffError::DimensionMismatch { expected: d, got: x.len() });
        }
        let mut a = vec![T::zero(); d * d];
        let mut b = vec![T::zero(); d];
        self.diffusion_into(t, x, &mut a);
        self.drift_into(t, x, &mut b);
        let xs = crate::scalar::to_f64_vec(x);
        if !crate::scalar::all_finite(&a) || !crate::scalar::all_finite(&b) || !t.is_finite() {
            return Err(CoeffError::NonFinite { field: self.label.clone(), t: t.as_f64(), x: xs });
        }
        let asym = linalg::max_asymmetry(&a, d);
        if asym > T::zero() {
            return Err(CoeffError::NotSymmetric { field: self.label.clone(), x: xs, asymmetry: asym.as_f64() });
        }
        let norm = linalg::operator_norm(&a, d);
        let min_eig = linalg::min_eigenvalue(&a, d);
        if min_eig < -T::lit(1e-12) * norm {
            return Err(CoeffError::NotPsd { field: self.label.clone(), x: xs, min_eig: min_eig.as_f64() });
        }
        Ok((a, b))
    }

    /// The field `(A, -b)`.
    pub fn with_reversed_drift(&self) -> Self {
        let drift = self.drift.clone();
        Self {
            dim: self.dim,
            label: format!("{}-reversed", self.label),
            autonomous: self.autonomous,
            diffusion: self.diffusion.clone(),
            drift: Arc::new(move |t, x, out: &mut [T]| {
                drift(t, x, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }),
        }
    }
}

/// Evaluates `(A(t,x), b(t,x))` with all invariant checks.
pub fn eval_field<T: Scalar>(field: &CoefficientField<T>, t: T, x: &[T]) -> Result<(Vec<T>, Vec<T>), CoeffError> {
    field.eval(t, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_at_unit_vector() {
        let f = builtin_field::<f64>("ou", &Params::from([("dim".into(), ParamValue::Number(2.0))])).unwrap();
        let (a, b) = f.eval(0.0, &[1.0, 0.0]).unwrap();
        assert_eq!(a, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(b, vec![-1.0, 0.0]);
    }

    #[test]
    fn heat_is_identity_and_zero() {
        let f = builtin_field::<f64>("heat", &Params::new()).unwrap();
        let (a, b) = f.eval(0.3, &[17.0]).unwrap();
        assert_eq!((a, b), (vec![1.0], vec![0.0]));
    }

    #[test]
    fn cubic_at_two() {
        let f = builtin_field::<f64>("cubic-confine", &Params::new()).unwrap();
        assert_eq!(f.eval(0.0, &[2.0]).unwrap(), (vec![1.0], vec![-8.0]));
    }

    #[test]
    fn eval_rejects_bad_matrices() {
        let asym = CoefficientField::<f64>::new(
            2,
            "asym",
            |_, _, o: &mut [f64]| o.copy_from_slice(&[1.0, 0.5, 0.0, 1.0]),
            |_, _, o: &mut [f64]| o.fill(0.0),
        );
        assert!(matches!(asym.eval(0.0, &[0.0, 0.0]), Err(CoeffError::NotSymmetric { .. })));
        let neg = CoefficientField::<f64>::isotropic(1, "neg", -1.0, |_, _, o: &mut [f64]| o.fill(0.0));
        assert!(matches!(neg.eval(0.0, &[0.0]), Err(CoeffError::NotPsd { .. })));
        let nan = CoefficientField::<f64>::isotropic(1, "nan", 1.0, |_, _, o: &mut [f64]| o.fill(f64::NAN));
        assert!(matches!(nan.eval(0.0, &[0.0]), Err(CoeffError::NonFinite { .. })));
        assert!(matches!(nan.eval(0.0, &[0.0, 1.0]), Err(CoeffError::DimensionMismatch { .. })));
    }

    #[test]
    fn f32_fields_evaluate() {
        let f = builtin_field::<f32>("ou", &Params::new()).unwrap();
        assert_eq!(f.eval(0.0, &[0.5]).unwrap(), (vec![1.0f32], vec![-0.5f32]));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let f = builtin_field::<f64>("polar-vortex-2d", &Params::new()).unwrap();
        let x = [2.37, -1.91];
        assert_eq!(f.eval(0.0, &x).unwrap(), f.eval(0.0, &x).unwrap());
    }
}
