//! Probability densities behind the gradient-drift builtins (`b = ∇ρ/ρ`, `A = I`,
//! so `ρ` is stationary).

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::polar::{CanonicalBump, Profile};
use crate::quad;

/// Standard Gaussian density on `R^d`.
pub fn gaussian(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (-0.5 * r2).exp() / (2.0 * PI).powf(0.5 * x.len() as f64)
}

/// Normalizer `c` of `c (2 + sin x²) / (1 + x²)`.
pub fn oscillatory_normalizer() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / oscillatory_unnormalized_mass())
}

fn oscillatory_unnormalized_mass() -> f64 {
    // ∫ 2/(1+x²) = 2π; the sin(x²) part is integrated on [0, L] and the tail
    // taken from its leading integration-by-parts term.
    let l = 40.0_f64;
    let body = quad::simpson(|x| (x * x).sin() / (1.0 + x * x), 0.0, l, 800_000);
    let tail = (l * l).cos() / (2.0 * l * (1.0 + l * l));
    2.0 * PI + 2.0 * (body + tail)
}

pub fn oscillatory(x: f64) -> f64 {
    oscillatory_normalizer() * (2.0 + (x * x).sin()) / (1.0 + x * x)
}

/// `ρ'(x)/ρ(x)` for the oscillatory density.
pub fn oscillatory_log_derivative(x: f64) -> f64 {
    let s = x * x;
    2.0 * x * s.cos() / (2.0 + s.sin()) - 2.0 * x / (1.0 + s)
}

/// `Σ_{n ≤ n_max} 2^{-n} ψ(r - n) (2 + sin(4ⁿ φ))`, unnormalized.
pub fn polar_vortex_unnormalized(x: f64, y: f64, n_max: u32) -> f64 {
    let r = x.hypot(y);
    match polar_shell(r, n_max) {
        Some((n, s)) => {
            let phi = y.atan2(x);
            let k = 4f64.powi(n as i32);
            0.5f64.powi(n as i32) * CanonicalBump.value(s) * (2.0 + (k * phi).sin())
        }
        None => 0.0,
    }
}

/// Total mass of the truncated polar series.
pub fn polar_vortex_mass(n_max: u32) -> f64 {
    // ∫ (2 + sin(4ⁿφ)) dφ = 4π on a full turn.
    (1..=n_max)
        .map(|n| {
            let m = quad::simpson(|s| CanonicalBump.value(s) * (s + n as f64), 0.0, 1.0, 2000);
            0.5f64.powi(n as i32) * 4.0 * PI * m
        })
        .sum()
}

/// `∇ρ/ρ` for the polar series; zero where `ρ` vanishes.
pub fn polar_vortex_log_gradient(x: f64, y: f64, n_max: u32) -> [f64; 2] {
    let r = x.hypot(y);
    let Some((n, s)) = polar_shell(r, n_max) else {
        return [0.0, 0.0];
    };
    let phi = y.atan2(x);
    let k = 4f64.powi(n as i32);
    let dr = CanonicalBump.log_derivative(s);
    let dphi = k * (k * phi).cos() / (2.0 + (k * phi).sin());
    let (c, sn) = (x / r, y / r);
    [dr * c - dphi / r * sn, dr * sn + dphi / r * c]
}

/// `(n, r - n)` when `r` lies strictly inside the support of the `n`-th term.
fn polar_shell(r: f64, n_max: u32) -> Option<(u32, f64)> {
    let n = r.floor();
    let s = r - n;
    if n >= 1.0 && n <= n_max as f64 && s > 0.0 && s < 1.0 {
        Some((n as u32, s))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillatory_integrates_to_one() {
        // independent check: trapezoid on a wide window plus the 1/x² tail of the 2/(1+x²) part
        let l = 60.0;
        let n = 2_400_000;
        let h = 2.0 * l / n as f64;
        let mut acc = 0.5 * (oscillatory(-l) + oscillatory(l));
        for i in 1..n {
            acc += oscillatory(-l + h * i as f64);
        }
        let tail = 2.0 * oscillatory_normalizer() * 2.0 * (PI / 2.0 - l.atan());
        assert!((acc * h + tail - 1.0).abs() < 1e-6, "{}", acc * h + tail);
    }

    #[test]
    fn oscillatory_log_derivative_matches_fd() {
        for &x in &[-3.3, -0.4, 0.0, 1.0, 2.5, 7.1] {
            let h = 1e-6;
            let fd = ((oscillatory(x + h)).ln() - (oscillatory(x - h)).ln()) / (2.0 * h);
            assert!((fd - oscillatory_log_derivative(x)).abs() < 1e-6 * (1.0 + fd.abs()), "x={x}");
        }
    }

    #[test]
    fn polar_mass_by_cartesian_sum() {
        let n_max = 2;
        let (l, n) = (3.0, 1200);
        let h = 2.0 * l / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (-l + (i as f64 + 0.5) * h, -l + (j as f64 + 0.5) * h);
                acc += polar_vortex_unnormalized(x, y, n_max);
            }
        }
        let mass = polar_vortex_mass(n_max);
        assert!((acc * h * h - mass).abs() < 2e-3 * mass, "{} vs {}", acc * h * h, mass);
    }

    #[test]
    fn polar_log_gradient_matches_fd() {
        for &(x, y) in &[(1.5, 0.2), (-0.3, 2.4), (2.1, -1.7), (0.9, 0.9)] {
            let g = polar_vortex_log_gradient(x, y, 3);
            let h = 1e-7;
            let f = |a: f64, b: f64| polar_vortex_unnormalized(a, b, 3).ln();
            let gx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
            let gy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
            assert!((gx - g[0]).abs() < 1e-5 * (1.0 + gx.abs()), "{gx} vs {}", g[0]);
            assert!((gy - g[1]).abs() < 1e-5 * (1.0 + gy.abs()), "{gy} vs {}", g[1]);
        }
    }
}
