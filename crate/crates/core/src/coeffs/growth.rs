use serde::{Deserialize, Serialize};

use super::{CoeffError, CoefficientField};
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `‖A‖ + |⟨b,x⟩| ≤ C + C|x|²`
    Quadratic,
    /// `⟨b,x⟩ ≤ C + C|x|² log(1+|x|²)`
    OneSidedDrift,
    /// `‖A‖ ≤ C + C|x|² log(1+|x|²)`
    OneSidedDiffusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: BoundKind,
    pub t: f64,
    pub x: Vec<f64>,
    pub value: f64,
    /// Right-hand side at the constant the violation was measured against.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Smallest ladder value certifying the quadratic bound, if any.
    pub quad_constant: Option<f64>,
    /// Smallest ladder value certifying both one-sided bounds, if any.
    pub onesided_constant: Option<f64>,
    /// `sup value / (1 + |x|²)` over the samples.
    pub quad_required: f64,
    /// `sup value / (1 + |x|² log(1+|x|²))` over the samples.
    pub onesided_required: f64,
    /// Samples exceeding the bound at the reported constant (or the ladder top
    /// when nothing certifies).
    pub violations: Vec<Violation>,
    pub radii: Vec<f64>,
    pub ladder: Vec<f64>,
}

/// `[0, 1, 2, 4, ..., 2^20]`.
pub fn default_ladder() -> Vec<f64> {
    std::iter::once(0.0).chain((0..=20).map(|k| 2f64.powi(k))).collect()
}

fn directions(d: usize, angular_samples: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let m = angular_samples.max(1);
            (0..m)
                .map(|k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                    vec![phi.cos(), phi.sin()]
                })
                .collect()
        }
        _ => {
            let mut dirs = Vec::new();
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    dirs.push(e);
                }
            }
            if d <= 6 {
                let inv = 1.0 / (d as f64).sqrt();
                for mask in 0..(1u32 << d) {
                    dirs.push((0..d).map(|i| if mask >> i & 1 == 1 { -inv } else { inv }).collect());
                }
            }
            dirs
        }
    }
}

/// Sample points `r·u` over `radii` and the directions used by [`classify_growth`].
pub fn sample_points(d: usize, radii: &[f64], angular_samples: usize) -> Vec<Vec<f64>> {
    let dirs = directions(d, angular_samples);
    radii.iter().flat_map(|&r| dirs.iter().map(move |u| u.iter().map(|v| v * r).collect())).collect()
}

struct Sample {
    t: f64,
    x: Vec<f64>,
    norm_a: f64,
    bx: f64,
    w_quad: f64,
    w_one: f64,
}

/// Sample-based growth certificate over `radii × directions × t_samples`.
///
/// In two dimensions `angular_samples` equally spaced directions are used; in
/// higher dimensions the coordinate axes and (for `d ≤ 6`) the diagonals.
pub fn classify_growth<T: Scalar>(
    field: &CoefficientField<T>,
    radii: &[f64],
    t_samples: &[f64],
    angular_samples: usize,
) -> Result<GrowthReport, CoeffError> {
    let bad = |reason: &str| CoeffError::BadParams { name: "classify_growth".into(), reason: reason.into() };
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(bad("radii must be nonempty, nonnegative and strictly increasing"));
    }
    if t_samples.is_empty() {
        return Err(bad("need at least one time sample"));
    }
    let d = field.dim();
    let mut samples = Vec::new();
    for &t in t_samples {
        for x in sample_points(d, radii, angular_samples) {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let xt: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
                let (a, b) = field.eval(T::lit(t), &xt)?;
                let norm_a = linalg::operator_norm(&a, d).as_f64();
                let bx: f64 = b.iter().zip(&x).map(|(bi, xi)| bi.as_f64() * xi).sum();
                samples.push(Sample { t, x, norm_a, bx, w_quad: 1.0 + r2, w_one: 1.0 + r2 * r2.ln_1p() });
        }
    }

    let ladder = default_ladder();
    let quad_value = |s: &Sample| s.norm_a + s.bx.abs();
    let quad_required = samples.iter().map(|s| quad_value(s) / s.w_quad).fold(0.0, f64::max);
    let onesided_required = samples.iter().map(|s| s.bx.max(s.norm_a) / s.w_one).fold(0.0, f64::max);
    let pick = |required: f64| ladder.iter().copied().find(|&c| required <= c);
    let quad_constant = pick(quad_required);
    let onesided_constant = pick(onesided_required);

    let top = *ladder.last().expect("ladder nonempty");
    let mut violations = Vec::new();
    let qc = quad_constant.unwrap_or(top);
    let oc = onesided_constant.unwrap_or(top);
    for s in &samples {
        let mut push = |kind, value: f64, bound: f64| {
            if value > bound {
                violations.push(Violation { kind, t: s.t, x: s.x.clone(), value, bound });
            }
        };
        push(BoundKind::Quadratic, quad_value(s), qc * s.w_quad);
        push(BoundKind::OneSidedDrift, s.bx, oc * s.w_one);
        push(BoundKind::OneSidedDiffusion, s.norm_a, oc * s.w_one);
    }

    Ok(GrowthReport {
        quad_constant,
        onesided_constant,
        quad_required,
        onesided_required,
        violations,
        radii: radii.to_vec(),
        ladder,
    })
}
