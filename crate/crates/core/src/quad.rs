//! One-dimensional quadrature shared by the modules.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: {what} (estimate {estimate}, change {change})")]
    NotConverged { what: String, estimate: f64, change: f64 },
    #[error("non-finite integrand value in {0}")]
    NonFinite(String),
}

/// Tanh-sinh quadrature on a finite interval; fails when the reported error
/// estimate exceeds `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, what: &str) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if !out.integral.is_finite() {
        return Err(QuadratureError::NonFinite(what.to_string()));
    }
    if !(out.error_estimate <= tol) {
        return Err(QuadratureError::NotConverged {
            what: what.to_string(),
            estimate: out.integral,
            change: out.error_estimate,
        });
    }
    Ok(out.integral)
}

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Simpson with `n` panels, checked against `2n` panels. Returns the finer
/// value when the relative change is within `rel_tol`.
pub fn simpson_checked<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    n: usize,
    rel_tol: f64,
    what: &str,
) -> Result<f64, QuadratureError> {
    let coarse = simpson(&f, a, b, n);
    let fine = simpson(&f, a, b, 2 * n);
    if !fine.is_finite() {
        return Err(QuadratureError::NonFinite(what.to_string()));
    }
    let change = (fine - coarse).abs();
    if change > rel_tol * fine.abs().max(f64::MIN_POSITIVE) {
        return Err(QuadratureError::NotConverged { what: what.to_string(), estimate: fine, change });
    }
    Ok(fine)
}

/// Relative change `|fine - coarse| / |fine|`, treating two zeros as agreement.
pub fn relative_change(coarse: f64, fine: f64) -> f64 {
    let diff = (fine - coarse).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / fine.abs().max(coarse.abs())
    }
}
