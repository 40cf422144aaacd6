use crate::fpk::Grid;

/// `∫ |e(x)| dx` over an interval of length `len` where `e` is linear with
/// end values `e0`, `e1`.
fn abs_linear(e0: f64, e1: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if e0 * e1 >= 0.0 {
        0.5 * (e0.abs() + e1.abs()) * len
    } else {
        0.5 * (e0 * e0 + e1 * e1) / (e0.abs() + e1.abs()) * len
    }
}

/// Kolmogorov–Smirnov distance `sup |F_n - F|` of a sample against a law
/// given by `cdf(x) = (F(x-), F(x))`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> (f64, f64)) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let (left, right) = cdf(xs[i]);
        d = d.max(left - i as f64 / n).max((j + 1) as f64 / n - right).max(right - (j + 1) as f64 / n).max(i as f64 / n - left);
        i = j + 1;
    }
    d
}

/// `W₁` between two empirical laws on the line, `∫ |F_a - F_b| dx`.
pub fn w1_samples(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = f64::NEG_INFINITY;
    let mut acc = 0.0;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        if prev.is_finite() {
            acc += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        }
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        prev = x;
    }
    acc
}

/// `∫_{-R}^{R} |F_n(x) - G(x)| dx` where `G` is the CDF of the (unnormalized)
/// piecewise constant one-dimensional grid density. Samples left of the
/// window count towards `F_n`; the integral itself is restricted to the window.
pub fn w1_samples_vs_grid(samples: &[f64], grid: &Grid, density: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let h = grid.h();
    let mut idx = xs.partition_point(|&x| x < -grid.r_dom);
    let mut g = 0.0;
    let mut acc = 0.0;
    for (k, &rho) in density.iter().enumerate() {
        let (lo, hi) = (grid.axis_face(k), grid.axis_face(k + 1));
        let mut x0 = lo;
        let mut g0 = g;
        while idx < xs.len() && xs[idx] < hi {
            let x1 = xs[idx];
            let g1 = g + rho * (x1 - lo);
            let f = idx as f64 / n;
            acc += abs_linear(f - g0, f - g1, x1 - x0);
            x0 = x1;
            g0 = g1;
            idx += 1;
        }
        let g1 = g + rho * h;
        let f = idx as f64 / n;
        acc += abs_linear(f - g0, f - g1, hi - x0);
        g = g1;
    }
    acc
}
