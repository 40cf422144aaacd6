//! Lyapunov functions `V = P(1 + |x|²)`, the generator applied to them, the
//! clip `ζ_N`, the concave envelope `θ`, the a-priori bounds and the flow
//! condition integrals.

mod bounds;
mod clip;
mod conditions;
mod theta;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{CoeffError, CoefficientField};
use crate::fpk::FpkError;
use crate::quad::QuadratureError;
use crate::scalar::{norm_sq, Scalar};
use crate::testfn::{apply_generator_with, carre_du_champ_with, SmoothFunction, Workspace};

pub use bounds::{
    dirichlet_integral, doob_bound, example21_constant, gronwall_bound, lv_total_bound, BoundCertificate,
};
pub use clip::{clip_concave, Clip};
pub use conditions::{condition_integral, stationary_band_integral, ConditionVariant, ConditionValue};
pub use theta::{make_theta, Theta};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LyapunovError {
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("non-finite value of {0}")]
    NonFinite(String),
    #[error("carré du champ {value:e} < 0 at x={x:?}: diffusion matrix is not positive semidefinite")]
    NegativeForm { value: f64, x: Vec<f64> },
    #[error("dimension mismatch: field {field}, Lyapunov function {lyap}")]
    DimensionMismatch { field: usize, lyap: usize },
    #[error("tail mass does not decay: ν(V > {q:e}) = {tail:e}")]
    TailNotDecaying { q: f64, tail: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Flow(#[from] FpkError),
}

/// A scalar function of one variable with its first two derivatives.
pub trait ScalarMap<T: Scalar = f64>: Send + Sync {
    /// `(f(s), f'(s), f''(s))`.
    fn eval(&self, s: T) -> (T, T, T);
}

impl<T: Scalar, F: Fn(T) -> (T, T, T) + Send + Sync> ScalarMap<T> for F {
    fn eval(&self, s: T) -> (T, T, T) {
        self(s)
    }
}

/// `V(s) = log s`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogProfile;

impl<T: Scalar> ScalarMap<T> for LogProfile {
    fn eval(&self, s: T) -> (T, T, T) {
        let inv = s.recip();
        (s.ln(), inv, -inv * inv)
    }
}

/// `V(s) = log(1 + log s)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogLogProfile;

impl<T: Scalar> ScalarMap<T> for LogLogProfile {
    fn eval(&self, s: T) -> (T, T, T) {
        let l = T::one() + s.ln();
        let d1 = (s * l).recip();
        let d2 = -(T::one() + l) / (s * s * l * l);
        (l.ln(), d1, d2)
    }
}

/// `V(s) = s^p - 1`, `0 < p ≤ 1`.
#[derive(Debug, Clone, Copy)]
pub struct PowerProfile<T> {
    pub p: T,
}

impl<T: Scalar> ScalarMap<T> for PowerProfile<T> {
    fn eval(&self, s: T) -> (T, T, T) {
        let p = self.p;
        let v = s.powf(p);
        (v - T::one(), p * v / s, p * (p - T::one()) * v / (s * s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Log,
    Loglog,
    Custom(String),
}

/// `V(x) = outer(P(1 + |x|²))`, where `outer` is the identity unless the
/// spec was built with [`LyapunovSpec::compose`].
#[derive(Clone)]
pub struct LyapunovSpec<T: Scalar = f64> {
    dim: usize,
    family: Family,
    profile: Arc<dyn ScalarMap<T>>,
    outer: Option<Arc<dyn ScalarMap<T>>>,
}

impl<T: Scalar> std::fmt::Debug for LyapunovSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("dim", &self.dim)
            .field("family", &self.family)
            .field("composed", &self.outer.is_some())
            .finish()
    }
}

impl<T: Scalar> LyapunovSpec<T> {
    pub fn log(dim: usize) -> Self {
        Self { dim, family: Family::Log, profile: Arc::new(LogProfile), outer: None }
    }

    pub fn loglog(dim: usize) -> Self {
        Self { dim, family: Family::Loglog, profile: Arc::new(LogLogProfile), outer: None }
    }

    /// A custom profile `P` on `[1, ∞)`.
    pub fn custom(dim: usize, label: impl Into<String>, profile: impl ScalarMap<T> + 'static) -> Self {
        Self { dim, family: Family::Custom(label.into()), profile: Arc::new(profile), outer: None }
    }

    /// Looks up `log`, `loglog` or `power` (custom, `P(s) = s^p - 1`).
    pub fn by_name(name: &str, dim: usize, power: Option<f64>) -> Result<Self, LyapunovError> {
        match name {
            "log" => Ok(Self::log(dim)),
            "loglog" => Ok(Self::loglog(dim)),
            "power" | "custom" => {
                let p = power.unwrap_or(0.5);
                if !(p > 0.0 && p <= 1.0) {
                    return Err(LyapunovError::InvalidArgument(format!("power exponent must lie in (0, 1], got {p}")));
                }
                Ok(Self::custom(dim, format!("power:{p}"), PowerProfile { p: T::lit(p) }))
            }
            other => Err(LyapunovError::InvalidArgument(format!("unknown Lyapunov family '{other}'"))),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `θ ∘ V`.
    pub fn compose(&self, outer: impl ScalarMap<T> + 'static) -> Self {
        assert!(self.outer.is_none(), "composing an already composed Lyapunov function");
        Self { outer: Some(Arc::new(outer)), ..self.clone() }
    }

    /// The bare `V` of a composed spec.
    pub fn inner(&self) -> Self {
        Self { outer: None, ..self.clone() }
    }

    /// `(P(s), P'(s), P''(s))`.
    pub fn profile(&self, s: T) -> (T, T, T) {
        self.profile.eval(s)
    }

    #[inline]
    fn outer_at(&self, v: T) -> (T, T, T) {
        match &self.outer {
            None => (v, T::one(), T::zero()),
            Some(o) => o.eval(v),
        }
    }
}

impl<T: Scalar> SmoothFunction<T> for LyapunovSpec<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[T]) -> T {
        let (p, _, _) = self.profile.eval(T::one() + norm_sq(x));
        self.outer_at(p).0
    }

    fn gradient(&self, x: &[T], out: &mut [T]) {
        let (p, p1, _) = self.profile.eval(T::one() + norm_sq(x));
        let (_, o1, _) = self.outer_at(p);
        let k = T::lit(2.0) * p1 * o1;
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = k * xi;
        }
    }

    fn hessian(&self, x: &[T], out: &mut [T]) {
        let d = self.dim;
        let (p, p1, p2) = self.profile.eval(T::one() + norm_sq(x));
        let (_, o1, o2) = self.outer_at(p);
        // D²(o∘P∘s) = o''·∇P∇Pᵀ + o'·(4P'' xxᵀ + 2P' I), ∇P = 2P'x
        let rank1 = o2 * T::lit(4.0) * p1 * p1 + o1 * T::lit(4.0) * p2;
        let diag = o1 * T::lit(2.0) * p1;
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = rank1 * x[i] * x[j] + if i == j { diag } else { T::zero() };
            }
        }
    }

    fn label(&self) -> String {
        let base = match &self.family {
            Family::Log => "log".to_string(),
            Family::Loglog => "loglog".to_string(),
            Family::Custom(s) => s.clone(),
        };
        if self.outer.is_some() {
            format!("theta∘{base}")
        } else {
            base
        }
    }
}

fn check_dims<T: Scalar>(field: &CoefficientField<T>, lyap: &LyapunovSpec<T>, x: &[T]) -> Result<(), LyapunovError> {
    if field.dim() != lyap.dim || x.len() != lyap.dim {
        return Err(LyapunovError::DimensionMismatch { field: field.dim(), lyap: lyap.dim });
    }
    Ok(())
}

/// `L V (t,x) = trace(A D²V) + ⟨b, ∇V⟩`.
pub fn apply_l<T: Scalar>(field: &CoefficientField<T>, lyap: &LyapunovSpec<T>, t: T, x: &[T]) -> Result<T, LyapunovError> {
    check_dims(field, lyap, x)?;
    field.eval(t, x)?;
    let mut ws = Workspace::new(lyap.dim);
    let v = apply_generator_with(field, lyap, t, x, &mut ws);
    if !v.is_finite() {
        return Err(LyapunovError::NonFinite("L V".into()));
    }
    Ok(v)
}

/// `⟨A ∇V, ∇V⟩`.
pub fn carre_du_champ<T: Scalar>(
    field: &CoefficientField<T>,
    lyap: &LyapunovSpec<T>,
    t: T,
    x: &[T],
) -> Result<T, LyapunovError> {
    check_dims(field, lyap, x)?;
    let mut ws = Workspace::new(lyap.dim);
    let v = carre_du_champ_with(field, lyap, t, x, &mut ws);
    if !v.is_finite() {
        return Err(LyapunovError::NonFinite("carré du champ".into()));
    }
    if v < -T::lit(1e-12) {
        return Err(LyapunovError::NegativeForm { value: v.as_f64(), x: crate::scalar::to_f64_vec(x) });
    }
    Ok(v)
}

/// Sampled check of the regularity hypotheses a generalized profile should
/// satisfy: ratio bounds of `V'`, `V''` over unit shifts and boundedness of
/// `|V'| + |V''|`, on `s ∈ [1, s_max]`. Reported, never enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHypotheses {
    pub max_shift_ratio: f64,
    pub max_derivative_sum: f64,
    pub value_increasing: bool,
}

pub fn profile_hypotheses(lyap: &LyapunovSpec<f64>, s_max: f64, samples: usize) -> ProfileHypotheses {
    let n = samples.max(2);
    let mut ratio = 0.0f64;
    let mut sum = 0.0f64;
    let mut prev = f64::NEG_INFINITY;
    let mut increasing = true;
    for k in 0..n {
        let s = 1.0 + (s_max - 1.0) * k as f64 / (n - 1) as f64;
        let (v, d1, d2) = lyap.profile(s);
        let (_, e1, e2) = lyap.profile(s + 1.0);
        let r = |a: f64, b: f64| if b == 0.0 { if a == 0.0 { 0.0 } else { f64::INFINITY } } else { (a / b).abs() };
        ratio = ratio.max(r(d2, e2) + r(d1, e1)).max(r(e2, d2) + r(e1, d1));
        sum = sum.max(d1.abs() + d2.abs());
        increasing &= v >= prev;
        prev = v;
    }
    ProfileHypotheses { max_shift_ratio: ratio, max_derivative_sum: sum, value_increasing: increasing }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, Params};

    fn ou() -> CoefficientField<f64> {
        builtin_field("ou", &Params::new()).unwrap()
    }

    #[test]
    fn log_family_on_ou() {
        let v = LyapunovSpec::log(1);
        assert_eq!(apply_l(&ou(), &v, 0.0, &[0.0]).unwrap(), 2.0);
        assert!((apply_l(&ou(), &v, 0.0, &[1.0]).unwrap() + 1.0).abs() < 1e-15);
        let zero = CoefficientField::<f64>::zero(1);
        assert_eq!(apply_l(&zero, &v, 0.0, &[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn carre_du_champ_values() {
        let v = LyapunovSpec::log(1);
        let heat = builtin_field::<f64>("heat", &Params::new()).unwrap();
        assert_eq!(carre_du_champ(&heat, &v, 0.0, &[0.0]).unwrap(), 0.0);
        assert!((carre_du_champ(&heat, &v, 0.0, &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(carre_du_champ(&CoefficientField::zero(1), &v, 0.0, &[1.0]).unwrap(), 0.0);
        let neg = CoefficientField::<f64>::isotropic(1, "neg", -1.0, |_, _, o: &mut [f64]| o.fill(0.0));
        assert!(matches!(carre_du_champ(&neg, &v, 0.0, &[1.0]), Err(LyapunovError::NegativeForm { .. })));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for v in [LyapunovSpec::<f64>::log(2), LyapunovSpec::loglog(2), LyapunovSpec::by_name("power", 2, Some(0.5)).unwrap()] {
            for x in [[0.3, -0.4], [2.0, 1.0], [-7.0, 3.0]] {
                let mut g = [0.0; 2];
                let mut h = [0.0; 4];
                v.gradient(&x, &mut g);
                v.hessian(&x, &mut h);
                let e = 1e-5;
                for i in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += e;
                    xm[i] -= e;
                    let fd = (v.value(&xp) - v.value(&xm)) / (2.0 * e);
                    assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1e-3), "{}: grad", v.label());
                    let mut gp = [0.0; 2];
                    let mut gm = [0.0; 2];
                    v.gradient(&xp, &mut gp);
                    v.gradient(&xm, &mut gm);
                    for j in 0..2 {
                        let fd = (gp[j] - gm[j]) / (2.0 * e);
                        assert!((fd - h[j * 2 + i]).abs() <= 1e-5 * fd.abs().max(1e-3), "{}: hess", v.label());
                    }
                }
            }
        }
    }

    #[test]
    fn coercive_on_radius_ladder() {
        for v in [LyapunovSpec::<f64>::log(1), LyapunovSpec::loglog(1)] {
            let vals: Vec<f64> = (0..8).map(|k| v.value(&[10f64.powi(k)])).collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn log_profile_hypotheses_hold() {
        let h = profile_hypotheses(&LyapunovSpec::log(1), 1e6, 2000);
        assert!(h.max_shift_ratio <= 8.0 + 1e-9 && h.max_derivative_sum <= 2.0 + 1e-12 && h.value_increasing);
    }

    #[test]
    fn f32_evaluation() {
        let v = LyapunovSpec::<f32>::log(1);
        let f = builtin_field::<f32>("ou", &Params::new()).unwrap();
        assert_eq!(apply_l(&f, &v, 0.0, &[0.0]).unwrap(), 2.0f32);
    }
}
