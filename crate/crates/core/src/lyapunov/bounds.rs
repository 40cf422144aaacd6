use serde::{Deserialize, Serialize};

use super::{apply_l, LyapunovError, LyapunovSpec};
use crate::coeffs::{default_ladder, sample_points, CoefficientField};
use crate::fpk::{flow_integral, MarginalFlow};
use crate::linalg;
use crate::testfn::{apply_generator_with, SmoothFunction, Workspace};

/// `(∫V dν + ∫₀^τ∫W dμ_s ds) e^{Ct}`.
pub fn gronwall_bound(nu_integral: f64, w_integral: f64, c: f64, t: f64) -> f64 {
    (nu_integral + w_integral) * (c * t).exp()
}

/// `2 e^{Cτ} (∫₀^τ∫W dμ_s ds + ∫V dν)`.
pub fn lv_total_bound(nu_integral: f64, w_integral: f64, c: f64, tau: f64) -> f64 {
    2.0 * (c * tau).exp() * (w_integral + nu_integral)
}

/// `min(1, (2/q)(∫V dν + ∫₀^τ∫(|√A∇V|² + |LV|) dμ_s ds))`.
pub fn doob_bound(nu_integral: f64, dirichlet_integral: f64, q: f64) -> f64 {
    assert!(q > 0.0, "level must be positive");
    (2.0 / q * (nu_integral + dirichlet_integral)).min(1.0)
}

/// `∫₀^τ∫(|√A∇V|² + |LV|) dμ_s ds` over the whole flow, midpoint in space
/// and trapezoid in time.
pub fn dirichlet_integral(
    field: &CoefficientField<f64>,
    lyap: &LyapunovSpec<f64>,
    flow: &MarginalFlow,
) -> Result<f64, LyapunovError> {
    if field.dim() != lyap.dim() || flow.grid().dim != lyap.dim() {
        return Err(LyapunovError::DimensionMismatch { field: field.dim(), lyap: lyap.dim() });
    }
    let ws = std::cell::RefCell::new(Workspace::new(lyap.dim()));
    let v = flow_integral(flow, |t, x| {
        let ws = &mut *ws.borrow_mut();
        let lv = apply_generator_with(field, lyap, t, x, ws).abs();
        lv + linalg::quadratic_form(&ws.a, &ws.grad)
    })?;
    if !v.is_finite() {
        return Err(LyapunovError::NonFinite("Dirichlet integral".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub nu_integral: f64,
    pub w_integral: f64,
    pub growth_c: f64,
    pub horizon_tau: f64,
    pub sup_bound: f64,
    pub lv_bound: f64,
}

impl BoundCertificate {
    pub fn new(nu_integral: f64, w_integral: f64, growth_c: f64, horizon_tau: f64) -> Self {
        Self {
            nu_integral,
            w_integral,
            growth_c,
            horizon_tau,
            sup_bound: gronwall_bound(nu_integral, w_integral, growth_c, horizon_tau),
            lv_bound: lv_total_bound(nu_integral, w_integral, growth_c, horizon_tau),
        }
    }

    /// Gronwall bound at an intermediate time `t ≤ τ`.
    pub fn bound_at(&self, t: f64) -> f64 {
        gronwall_bound(self.nu_integral, self.w_integral, self.growth_c, t)
    }
}

/// Smallest ladder `C₁` with `L V ≤ C₁ + C₁ V` on the sample set, if any.
///
/// A certified `C₁` gives `W ≡ C₁` and `C = C₁` in `LV ≤ W + CV`.
pub fn example21_constant(
    field: &CoefficientField<f64>,
    lyap: &LyapunovSpec<f64>,
    radii: &[f64],
    t_samples: &[f64],
    angular_samples: usize,
) -> Result<Option<f64>, LyapunovError> {
    let mut required = 0.0f64;
    for &t in t_samples {
        for x in sample_points(field.dim(), radii, angular_samples) {
            let lv = apply_l(field, lyap, t, &x)?;
            required = required.max(lv / (1.0 + lyap.value(&x)));
        }
    }
    Ok(default_ladder().into_iter().find(|&c| required <= c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, classify_growth, Params};

    #[test]
    fn gronwall_examples() {
        assert_eq!(gronwall_bound(1.0, 0.0, 0.0, 5.0), 1.0);
        assert!((gronwall_bound(1.0, 1.0, 1.0, 1.0) - 2.0 * std::f64::consts::E).abs() < 1e-15);
        assert!((gronwall_bound(0.7, 0.3, 2.0, 0.5) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn lv_examples() {
        assert_eq!(lv_total_bound(1.0, 0.0, 0.0, 1.0), 2.0);
        assert_eq!(lv_total_bound(0.0, 1.0, 0.0, 1.0), 2.0);
        assert!((lv_total_bound(1.0, 1.0, 1.0, 1.0) - 4.0 * std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn doob_examples() {
        assert_eq!(doob_bound(1.0, 0.0, 4.0), 0.5);
        assert_eq!(doob_bound(0.0, 0.0, 17.0), 0.0);
        assert_eq!(doob_bound(1.0, 3.0, 2.0), 1.0);
    }

    #[test]
    fn certificate_is_monotone_in_time() {
        let c = BoundCertificate::new(0.5, 2.0, 2.0, 1.0);
        assert!((0..=10).all(|k| c.bound_at(k as f64 / 10.0) <= c.sup_bound));
        assert_eq!(c.lv_bound, 2.0 * 2f64.exp() * 2.5);
    }

    #[test]
    fn ou_example21_ladder() {
        let f = builtin_field("ou", &Params::new()).unwrap();
        let radii: Vec<f64> = std::iter::once(0.0).chain((0..20).map(|k| 0.1 * 1.6f64.powi(k))).collect();
        assert_eq!(example21_constant(&f, &LyapunovSpec::log(1), &radii, &[0.0], 1).unwrap(), Some(2.0));
    }

    #[test]
    fn one_sided_growth_implies_example21() {
        let radii: Vec<f64> = (0..30).map(|k| 0.05 * 1.5f64.powi(k)).collect();
        for name in ["ou", "cubic-confine", "heat"] {
            let f = builtin_field(name, &Params::new()).unwrap();
            let g = classify_growth(&f, &radii, &[0.0], 8).unwrap();
            assert!(g.onesided_constant.is_some());
            assert!(example21_constant(&f, &LyapunovSpec::log(1), &radii, &[0.0], 8).unwrap().is_some(), "{name}");
        }
    }
}
