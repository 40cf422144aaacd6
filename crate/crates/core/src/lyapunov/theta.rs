use serde::{Deserialize, Serialize};

use super::clip::smoothstep;
use super::{LyapunovError, ScalarMap};
use crate::scalar::Scalar;

/// Concave, nondecreasing `θ` with `θ(0) = 0`, `0 ≤ θ' ≤ 1`, `θ'' ≤ 0` and
/// `θ → ∞`, growing slowly enough that `θ(V)` is integrable against a
/// measure with the given tail.
///
/// Piecewise linear through `(q_k, k)` with each kink smoothed by a quintic
/// blend of the slope over `[q_k - w_k, q_k + w_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    /// Ladder `q_1 < q_2 < ...` with `θ(q_k) = k` (away from the blends).
    pub corners: Vec<f64>,
    /// Slope on `[q_{k-1}, q_k]`, `q_0 = 0`; the last slope continues to infinity.
    pub slopes: Vec<f64>,
    pub windows: Vec<f64>,
}

impl Theta {
    pub fn identity() -> Self {
        Self { corners: Vec::new(), slopes: vec![1.0], windows: Vec::new() }
    }

    pub fn is_identity(&self) -> bool {
        self.corners.is_empty() && self.slopes == [1.0]
    }

    fn eval_f64(&self, t: f64) -> (f64, f64, f64) {
        let s0 = self.slopes[0];
        let (mut v, mut d1, mut d2) = (s0 * t, s0, 0.0);
        for (k, (&q, &w)) in self.corners.iter().zip(&self.windows).enumerate() {
            let jump = self.slopes[k + 1] - self.slopes[k];
            if jump == 0.0 || t <= q - w {
                continue;
            }
            if t >= q + w {
                v += jump * (t - q);
                d1 += jump;
            } else {
                let z = (t - q + w) / (2.0 * w);
                let (g, s, ds) = smoothstep(z);
                v += jump * 2.0 * w * g;
                d1 += jump * s;
                d2 += jump * ds / (2.0 * w);
            }
        }
        (v, d1, d2)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval_f64(t).0
    }

    /// The ladder used for the integrability proxy: the corners, or `2^k - 1`
    /// for the identity.
    pub fn ladder(&self) -> Vec<f64> {
        if self.corners.is_empty() {
            (0..=60).map(|k| 2f64.powi(k) - 1.0).collect()
        } else {
            std::iter::once(0.0).chain(self.corners.iter().copied()).collect()
        }
    }

    /// `Σ_k θ(q_{k+1}) (tail(q_k) - tail(q_{k+1}))` on [`Theta::ladder`],
    /// a discrete upper proxy for `∫ θ(V) dν` (minus the last-band tail).
    pub fn ladder_sum(&self, tail_mass: &dyn Fn(f64) -> f64) -> f64 {
        self.ladder().windows(2).map(|w| self.value(w[1]) * (tail_mass(w[0]) - tail_mass(w[1]))).sum()
    }
}

impl<T: Scalar> ScalarMap<T> for Theta {
    fn eval(&self, t: T) -> (T, T, T) {
        let (v, d1, d2) = self.eval_f64(t.as_f64());
        (T::lit(v), T::lit(d1), T::lit(d2))
    }
}

const DECAY_PROBE: f64 = 1.152_921_504_606_847e18; // 2^60
const DECAY_FLOOR: f64 = 1e-9;

/// Builds `θ` from `q ↦ ν(V > q)`.
///
/// With `v_integrable` the identity is returned. Otherwise corner `q_k` is the
/// smallest point past `q_{k-1} + (q_{k-1} - q_{k-2})` (and at least 1 beyond
/// `q_{k-1}`) where the tail has dropped below `4^{-k}`.
pub fn make_theta(tail_mass: &dyn Fn(f64) -> f64, v_integrable: bool) -> Result<Theta, LyapunovError> {
    if v_integrable {
        return Ok(Theta::identity());
    }
    let probes: Vec<f64> = (0..=60).map(|j| 2f64.powi(j)).collect();
    let tails: Vec<f64> = probes.iter().map(|&q| tail_mass(q)).collect();
    if tails.iter().any(|t| !t.is_finite() || *t < 0.0) || tails.windows(2).any(|w| w[1] > w[0] + 1e-15) {
        return Err(LyapunovError::InvalidArgument("tail mass must be finite, nonnegative and nonincreasing".into()));
    }
    let far = tail_mass(DECAY_PROBE);
    if far >= DECAY_FLOOR {
        return Err(LyapunovError::TailNotDecaying { q: DECAY_PROBE, tail: far });
    }

    let mut corners: Vec<f64> = Vec::new();
    let (mut prev, mut gap) = (0.0f64, 1.0f64);
    for k in 1..=40 {
        let target = 0.25f64.powi(k);
        if far > target {
            break;
        }
        let lo = prev + gap;
        let q = if tail_mass(lo) <= target {
            lo
        } else {
            let mut hi = 2.0 * lo;
            while tail_mass(hi) > target {
                hi *= 2.0;
            }
            let mut a = lo;
            for _ in 0..100 {
                let mid = 0.5 * (a + hi);
                if tail_mass(mid) <= target {
                    hi = mid;
                } else {
                    a = mid;
                }
            }
            hi
        };
        gap = q - prev;
        corners.push(q);
        prev = q;
    }

    let mut slopes = Vec::with_capacity(corners.len() + 1);
    let mut last = 0.0;
    for &q in &corners {
        // gaps never shrink, but rounding may; keep slopes nonincreasing
        let s = (1.0 / (q - last)).min(*slopes.last().unwrap_or(&1.0));
        slopes.push(s);
        last = q;
    }
    slopes.push(*slopes.last().unwrap_or(&1.0));
    let gaps: Vec<f64> = slopes.iter().map(|s| 1.0 / s).collect();
    let windows = (0..corners.len()).map(|k| 0.25 * gaps[k].min(gaps[k + 1])).collect();
    Ok(Theta { corners, slopes, windows })
}
