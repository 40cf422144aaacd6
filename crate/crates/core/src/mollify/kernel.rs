use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::MollifyError;
use crate::quad;

/// `e^{-1/u}` for `u > 0`, zero otherwise.
fn flat(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

fn flat_derivative(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp() / (u * u)
    } else {
        0.0
    }
}

/// Smooth cutoff: `1` on `[0, 1]`, `0` on `[2, ∞)`, and
/// `1 - e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})` with `u = s - 1` in between.
pub fn zeta(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        let (p, q) = (flat(u), flat(1.0 - u));
        q / (p + q)
    }
}

/// `ζ'(s) ≤ 0`.
pub fn zeta_derivative(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        return 0.0;
    }
    let u = s - 1.0;
    let (p, q) = (flat(u), flat(1.0 - u));
    let (dp, dq) = (flat_derivative(u), -flat_derivative(1.0 - u));
    (dq * p - q * dp) / ((p + q) * (p + q))
}

const ETA_TABLE: usize = 4096;

fn eta_table() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // cumulative ∫_s^2 ζ on a uniform grid of [1, 2], Simpson per cell
        let h = 1.0 / ETA_TABLE as f64;
        let mut tail = vec![0.0; ETA_TABLE + 1];
        for k in (0..ETA_TABLE).rev() {
            let a = 1.0 + k as f64 * h;
            tail[k] = tail[k + 1] + quad::simpson(zeta, a, a + h, 8);
        }
        tail
    })
}

/// `η(s) = ∫_s^∞ ζ`.
pub fn eta(s: f64) -> f64 {
    let table = eta_table();
    if s >= 2.0 {
        return 0.0;
    }
    if s <= 1.0 {
        return (1.0 - s.max(0.0)) + table[0];
    }
    let pos = (s - 1.0) * ETA_TABLE as f64;
    let k = (pos as usize).min(ETA_TABLE - 1);
    let w = pos - k as f64;
    (1.0 - w) * table[k] + w * table[k + 1]
}

/// The space-time kernel `h_ε(t, x) = c₁ c₂ ε^{-d-1} ζ(t²/ε²) ζ(|x|²/ε²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    pub epsilon: f64,
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0),
    }
}

pub fn make_kernel(epsilon: f64, dim: usize) -> Result<MollifierKernel, MollifyError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(MollifyError::InvalidEpsilon(format!("ε = {epsilon} must lie in (0, 1/2)")));
    }
    if dim == 0 {
        return Err(MollifyError::InvalidEpsilon("dimension must be positive".into()));
    }
    let radial = |r: f64| zeta(r * r) * r.powi(dim as i32 - 1);
    let sq2 = std::f64::consts::SQRT_2;
    let space = quad::adaptive(radial, 0.0, 1.0, 1e-13, "kernel space normalizer")?
        + quad::adaptive(radial, 1.0, sq2, 1e-13, "kernel space normalizer")?;
    let time = quad::adaptive(|t| zeta(t * t), 1.0, sq2, 1e-13, "kernel time normalizer")? + 1.0;
    Ok(MollifierKernel { epsilon, dim, c1: 1.0 / (sphere_area(dim) * space), c2: 1.0 / (2.0 * time) })
}

impl MollifierKernel {
    /// Half-width of the support in either variable.
    pub fn support_radius(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.epsilon
    }

    /// `c₂ ε^{-1} ζ(t²/ε²)`.
    #[inline]
    pub fn time_factor(&self, t: f64) -> f64 {
        let e = self.epsilon;
        self.c2 / e * zeta(t * t / (e * e))
    }

    /// `c₁ ε^{-d} ζ(|x|²/ε²)` given `|x|²`.
    #[inline]
    pub fn space_factor(&self, r2: f64) -> f64 {
        let e = self.epsilon;
        self.c1 * e.powi(-(self.dim as i32)) * zeta(r2 / (e * e))
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.time_factor(t) * self.space_factor(x.iter().map(|v| v * v).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shape() {
        assert_eq!(zeta(0.3), 1.0);
        assert_eq!(zeta(2.5), 0.0);
        let mut prev = 1.0;
        for k in 0..=1000 {
            let s = 1.0 + k as f64 / 1000.0;
            let z = zeta(s);
            assert!((0.0..=1.0).contains(&z) && z <= prev + 1e-15);
            assert!(zeta_derivative(s) <= 0.0);
            prev = z;
        }
        assert!((zeta(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_differences() {
        for s in [1.1, 1.37, 1.5, 1.83, 1.97] {
            let e = 1e-6;
            let fd = (zeta(s + e) - zeta(s - e)) / (2.0 * e);
            assert!((fd - zeta_derivative(s)).abs() < 1e-7, "{s}");
        }
    }

    #[test]
    fn eta_is_tail_integral() {
        assert_eq!(eta(2.0), 0.0);
        let direct = quad::adaptive(zeta, 1.3, 2.0, 1e-12, "eta").unwrap();
        assert!((eta(1.3) - direct).abs() < 1e-7);
        assert!((eta(0.25) - (0.75 + eta(1.0))).abs() < 1e-15);
        assert!((eta(1.0) - 0.5).abs() < 1e-7, "symmetric blend has mean 1/2");
    }

    #[test]
    fn kernel_has_unit_mass() {
        let k = make_kernel(0.1, 1).unwrap();
        let r = k.support_radius();
        let t_int = quad::simpson(|t| k.time_factor(t), -r, r, 4000);
        let x_int = quad::simpson(|x| k.space_factor(x * x), -r, r, 4000);
        assert!((t_int * x_int - 1.0).abs() < 1e-5);
        let k2 = make_kernel(0.2, 2).unwrap();
        let r = k2.support_radius();
        let n = 400;
        let h = 2.0 * r / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h);
                s += k2.space_factor(x * x + y * y) * h * h;
            }
        }
        assert!((s - 1.0).abs() < 1e-5, "{s}");
    }

    #[test]
    fn support_and_peak() {
        let k = make_kernel(0.1, 1).unwrap();
        assert_eq!(k.eval(0.0, &[0.1415]), 0.0);
        assert_eq!(k.eval(0.0, &[0.0]), k.c1 * k.c2 / 0.01);
        assert!(make_kernel(0.5, 1).is_err());
    }
}
