//! Band integrals of the polar oscillatory density: the angular part
//! `r^{-2}|∂_φ ρ|` diverges while the radial part `(1+r)^{-1}|∂_r ρ|` converges.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::CoeffError;
use crate::quad;

/// A one-dimensional profile on `(0, 1)` with its derivative.
pub trait Profile: Send + Sync {
    fn value(&self, s: f64) -> f64;
    fn derivative(&self, s: f64) -> f64;
    fn log_derivative(&self, s: f64) -> f64 {
        self.derivative(s) / self.value(s)
    }
}

/// `ψ(s) = exp(-1/(s(1-s)))` on `(0, 1)`, zero elsewhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalBump;

impl Profile for CanonicalBump {
    fn value(&self, s: f64) -> f64 {
        if s > 0.0 && s < 1.0 {
            (-1.0 / (s * (1.0 - s))).exp()
        } else {
            0.0
        }
    }

    fn derivative(&self, s: f64) -> f64 {
        if s > 0.0 && s < 1.0 {
            self.value(s) * self.log_derivative(s)
        } else {
            0.0
        }
    }

    fn log_derivative(&self, s: f64) -> f64 {
        let q = s * (1.0 - s);
        (1.0 - 2.0 * s) / (q * q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarIntegrals {
    /// `∫ ψ` on `[0, 1]`.
    pub c_psi: f64,
    /// `∫ (1+r)^{-1} |∂_r ρ| dx` over the truncated series.
    pub radial_integral: f64,
    /// Contribution of each shell `n = 1..=n_max` to `radial_integral`.
    pub radial_terms: Vec<f64>,
    /// Entry `k - 1` is the integral of `r^{-2}|∂_φ ρ|` over shells `n ≤ k`.
    pub angular_partials: Vec<f64>,
    /// Entry `k - 1` is `2π c_ψ Σ_{n ≤ k} 2ⁿ/(n+1)`.
    pub lower_bounds: Vec<f64>,
    /// Entry `k - 1` is `4 c_ψ Σ_{n ≤ k} 2ⁿ/(n+1)`, using `∫|cos(mφ)| dφ = 4`.
    pub certified_floor: Vec<f64>,
}

impl PolarIntegrals {
    /// `angular_partials[k] / angular_partials[k-1]` for `k = 2..=n_max`,
    /// returned with index `k - 2`.
    pub fn angular_ratios(&self) -> Vec<f64> {
        self.angular_partials.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Shell-by-shell quadrature with a panel-doubling check at 1% relative.
/// `quad_step` is the Simpson panel width on the unit interval.
pub fn polar_vortex_integrals(n_max: u32, psi: &dyn Profile, quad_step: f64) -> Result<PolarIntegrals, CoeffError> {
    if !(quad_step > 0.0 && quad_step <= 0.25) {
        return Err(CoeffError::BadParams {
            name: "polar_vortex_integrals".into(),
            reason: format!("quad_step must lie in (0, 0.25], got {quad_step}"),
        });
    }
    let panels = (1.0 / quad_step).ceil() as usize;
    let tol = 0.01;
    let c_psi = quad::simpson_checked(|s| psi.value(s).abs(), 0.0, 1.0, panels, tol, "c_psi")?;
    if !(c_psi > 0.0) {
        return Err(CoeffError::BadParams { name: "polar_vortex_integrals".into(), reason: "ψ vanishes".into() });
    }

    // ∫_0^{2π} |cos(4ⁿ φ)| dφ reduces by periodicity to one period of |cos u|,
    // integrated piecewise between its zeros.
    let abs_cos_turn = {
        let mut total = 0.0;
        let cuts = [0.0, 0.5 * PI, 1.5 * PI, 2.0 * PI];
        for w in cuts.windows(2) {
            total += quad::simpson_checked(|u: f64| u.cos().abs(), w[0], w[1], panels, tol, "|cos|")?;
        }
        total
    };

    let mut radial_terms = Vec::with_capacity(n_max as usize);
    let mut angular_partials = Vec::with_capacity(n_max as usize);
    let mut lower_bounds = Vec::with_capacity(n_max as usize);
    let mut certified_floor = Vec::with_capacity(n_max as usize);
    let (mut ang, mut lb) = (0.0, 0.0);
    for n in 1..=n_max {
        let nf = n as f64;
        let what = format!("shell {n}");
        let inv_r = quad::simpson_checked(|s| psi.value(s) / (s + nf), 0.0, 1.0, panels, tol, &what)?;
        let radial = quad::simpson_checked(
            |s| psi.derivative(s).abs() * (s + nf) / (1.0 + s + nf),
            0.0,
            1.0,
            panels,
            tol,
            &what,
        )?;
        ang += 2f64.powi(n as i32) * abs_cos_turn * inv_r;
        lb += 2f64.powi(n as i32) / (nf + 1.0);
        radial_terms.push(0.5f64.powi(n as i32) * 4.0 * PI * radial);
        angular_partials.push(ang);
        lower_bounds.push(2.0 * PI * c_psi * lb);
        certified_floor.push(4.0 * c_psi * lb);
    }
    Ok(PolarIntegrals {
        c_psi,
        radial_integral: radial_terms.iter().sum(),
        radial_terms,
        angular_partials,
        lower_bounds,
        certified_floor,
    })
}
