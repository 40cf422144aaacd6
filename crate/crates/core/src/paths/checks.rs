use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{laws::grid_cdf, GFunctional, InitialLaw, PathEnsemble, PathsError};
use super::wasserstein::{ks_statistic, w1_samples_vs_grid};
use crate::coeffs::CoefficientField;
use crate::fpk::{expectation_of, MarginalFlow};
use crate::lyapunov::LyapunovSpec;
use crate::testfn::{apply_generator_with, builtin_bumps, SmoothFunction, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sided {
    /// `|statistic| ≤ bound`.
    TwoSided,
    /// `statistic ≤ bound`.
    OneSided,
    /// `statistic ≥ bound`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub statistic: f64,
    /// Monte Carlo standard error of the statistic.
    pub stderr: f64,
    pub bound_or_tol: f64,
    pub sided: Sided,
    pub pass: bool,
    pub n_effective: usize,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, statistic: f64, stderr: f64, bound_or_tol: f64, sided: Sided, n_effective: usize) -> Self {
        let pass = match sided {
            Sided::TwoSided => statistic.abs() <= bound_or_tol,
            Sided::OneSided => statistic <= bound_or_tol,
            Sided::AtLeast => statistic >= bound_or_tol,
        };
        Self { name: name.into(), statistic, stderr, bound_or_tol, sided, pass, n_effective }
    }

    /// `|statistic| / stderr`, with `0/0 = 0`.
    pub fn z(&self) -> f64 {
        if self.stderr > 0.0 {
            self.statistic.abs() / self.stderr
        } else if self.statistic == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Suite rule: at least 90% of checks pass and the median `|stat|/stderr` is at most 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteVerdict {
    pub n_checks: usize,
    pub n_pass: usize,
    pub pass_fraction: f64,
    pub median_z: f64,
    pub pass: bool,
}

pub fn suite_verdict(reports: &[CheckReport]) -> SuiteVerdict {
    let n = reports.len();
    let n_pass = reports.iter().filter(|r| r.pass).count();
    let mut z: Vec<f64> = reports.iter().map(CheckReport::z).collect();
    z.sort_by(f64::total_cmp);
    let median_z = match n {
        0 => 0.0,
        _ if n % 2 == 1 => z[n / 2],
        _ => 0.5 * (z[n / 2 - 1] + z[n / 2]),
    };
    let pass_fraction = if n == 0 { 1.0 } else { n_pass as f64 / n as f64 };
    SuiteVerdict { n_checks: n, n_pass, pass_fraction, median_z, pass: pass_fraction >= 0.9 && median_z <= 2.0 }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `(mean, stderr)` with fixed-order pairwise summation.
fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = pairwise_sum(v) / n;
    let dev: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    let var = if v.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    (m, (var / n).sqrt())
}

/// Upper 1e-3 quantile of the Kolmogorov distribution.
const KS_CRITICAL: f64 = 1.9495;
/// Standard deviation of the Kolmogorov distribution.
const KS_SPREAD: f64 = 0.2603;

/// Law of `X_0` against `ν`: Kolmogorov–Smirnov in one dimension, bump
/// expectations with 4-standard-error bars otherwise (statistic is the
/// largest z-score).
pub fn initial_law_check(ens: &PathEnsemble, law: &InitialLaw) -> Result<CheckReport, PathsError> {
    if law.dim() != ens.dim() {
        return Err(PathsError::InvalidArgument("law and ensemble dimensions differ".into()));
    }
    let n = ens.n_valid();
    let sq = (n as f64).sqrt();
    if ens.dim() == 1 {
        let xs = ens.first_coordinates(0);
        let d = ks_statistic(&xs, |x| law.cdf_1d(x).expect("one-dimensional law"));
        return Ok(CheckReport::new("initial-law-ks", d, KS_SPREAD / sq, KS_CRITICAL / sq, Sided::OneSided, n));
    }
    let mut worst = 0.0f64;
    for phi in builtin_bumps(ens.dim()) {
        let v: Vec<f64> = ens.valid_paths().map(|i| phi.value(ens.state(i, 0))).collect();
        let (m, se) = mean_stderr(&v);
        let exact = law.expectation(&|x| phi.value(x));
        let diff = (m - exact).abs();
        let z = if se > 0.0 { diff / se } else if diff <= 1e-12 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    Ok(CheckReport::new("initial-law-bumps", worst, 1.0, 4.0, Sided::OneSided, n))
}

/// Probabilists' Gauss–Hermite rule with `m` nodes (weights sum to 1).
fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let e = (k as f64).sqrt();
        j[(k, k - 1)] = e;
        j[(k - 1, k)] = e;
    }
    let eig = SymmetricEigen::new(j);
    let w = (0..m).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (eig.eigenvalues.iter().copied().collect(), w)
}

/// `E f(x + b dt + σ√dt ξ) - f(x) - Lf(x) dt`, the one-step weak defect of
/// the scheme at `(t, x)`, by tensor Gauss–Hermite quadrature over `ξ`.
fn one_step_defect(
    field: &CoefficientField<f64>,
    f: &dyn SmoothFunction<f64>,
    t: f64,
    x: &[f64],
    dt: f64,
    rule: &(Vec<f64>, Vec<f64>),
    ws: &mut Workspace<f64>,
    y: &mut [f64],
) -> Result<f64, PathsError> {
    let d = x.len();
    let (nodes, weights) = rule;
    let lf = apply_generator_with(field, f, t, x, ws);
    let sigma = super::sqrt_diffusion(&ws.a, d)?.0;
    let sq = dt.sqrt();
    let mut ef = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let mut w = 1.0;
        for p in 0..d {
            w *= weights[idx[p]];
            let noise: f64 = (0..d).map(|q| sigma[p * d + q] * nodes[idx[q]]).sum();
            y[p] = x[p] + ws.b[p] * dt + noise * sq;
        }
        ef += w * f.value(y);
        let mut p = 0;
        while p < d {
            idx[p] += 1;
            if idx[p] < nodes.len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == d {
            break;
        }
    }
    Ok(ef - f.value(x) - lf * dt)
}

/// Allowance for the Euler–Maruyama bias of the martingale statistic on
/// `[s, t)`: `|B| + 4·se(B)` with `B = Σ_k E D(t_k, X_k)`, `D` the exact
/// one-step weak defect. The expectation at each step is taken over the
/// ensemble at the last recorded time before it, so `B = C_f dt (t - s)` with
/// `C_f` the law-averaged defect per `dt²`. `se(B)` adds the per-record
/// standard errors, which bounds it whatever their correlation.
pub fn bias_allowance(
    ens: &PathEnsemble,
    field: &CoefficientField<f64>,
    f: &dyn SmoothFunction<f64>,
    s: f64,
    t: f64,
) -> Result<f64, PathsError> {
    let d = ens.dim();
    if field.dim() != d || f.dim() != d {
        return Err(PathsError::InvalidArgument("field, test function and ensemble dimensions differ".into()));
    }
    let (rs, rt) = (ens.record_index(s)?, ens.record_index(t)?);
    let rule = gauss_hermite(if d == 1 { 16 } else { 10 });
    let mut ws = Workspace::new(d);
    let mut y = vec![0.0; d];
    let (mut total, mut spread) = (0.0, 0.0);
    for r in rs..rt {
        let steps = (ens.record_steps[r + 1] - ens.record_steps[r]) as f64;
        let tr = ens.record_steps[r] as f64 * ens.dt();
        let mut v = Vec::with_capacity(ens.n_valid());
        for i in ens.valid_paths() {
            v.push(one_step_defect(field, f, tr, ens.state(i, r), ens.dt(), &rule, &mut ws, &mut y)?);
        }
        let (m, se) = mean_stderr(&v);
        total += steps * m;
        spread += steps * se;
    }
    Ok(total.abs() + 4.0 * spread)
}

fn tracked_index(ens: &PathEnsemble, f: &dyn SmoothFunction<f64>) -> Result<usize, PathsError> {
    let label = f.label();
    ens.tracked_labels().iter().position(|l| *l == label).ok_or(PathsError::NotTracked(label))
}

/// Mean over paths of `[f(X_t) - f(X_s) - Σ_{s ≤ t_k < t} Lf(t_k, X_k) dt] g(ω)`.
///
/// `f` must have been tracked during simulation; `field` must be the field
/// whose generator was tracked. Passes if `|mean| ≤ 4 stderr + bias_allowance`.
pub fn martingale_check(
    ens: &PathEnsemble,
    field: &CoefficientField<f64>,
    f: &dyn SmoothFunction<f64>,
    g: &GFunctional,
    s: f64,
    t: f64,
) -> Result<CheckReport, PathsError> {
    check_window(ens, s, t)?;
    let bias = bias_allowance(ens, field, f, s, t)?;
    martingale_with_allowance(ens, f, g, s, t, bias)
}

/// Every combination of test function, functional and window, sharing the
/// bias allowance across functionals.
pub fn martingale_suite(
    ens: &PathEnsemble,
    field: &CoefficientField<f64>,
    tests: &[&dyn SmoothFunction<f64>],
    functionals: &[GFunctional],
    windows: &[(f64, f64)],
) -> Result<Vec<CheckReport>, PathsError> {
    let mut out = Vec::with_capacity(tests.len() * functionals.len() * windows.len());
    for f in tests {
        for &(s, t) in windows {
            check_window(ens, s, t)?;
            let bias = bias_allowance(ens, field, *f, s, t)?;
            for g in functionals {
                out.push(martingale_with_allowance(ens, *f, g, s, t, bias)?);
            }
        }
    }
    Ok(out)
}

fn check_window(ens: &PathEnsemble, s: f64, t: f64) -> Result<(), PathsError> {
    if !(0.0 <= s && s < t && t <= ens.horizon() * (1.0 + 1e-12)) {
        return Err(PathsError::InvalidArgument(format!("need 0 ≤ s < t ≤ T, got s={s}, t={t}")));
    }
    Ok(())
}

fn martingale_with_allowance(
    ens: &PathEnsemble,
    f: &dyn SmoothFunction<f64>,
    g: &GFunctional,
    s: f64,
    t: f64,
    bias: f64,
) -> Result<CheckReport, PathsError> {
    let j = tracked_index(ens, f)?;
    let (rs, rt) = (ens.record_index(s)?, ens.record_index(t)?);
    let gv = g.evaluate(ens, s)?;
    let v: Vec<f64> = ens
        .valid_paths()
        .map(|i| {
            let inc = f.value(ens.state(i, rt)) - f.value(ens.state(i, rs)) - (ens.integral(j, i, rt) - ens.integral(j, i, rs));
            inc * gv[i]
        })
        .collect();
    let (m, se) = mean_stderr(&v);
    Ok(CheckReport::new(
        format!("martingale[{}; {}; s={s}, t={t}]", f.label(), g.label()),
        m,
        se,
        4.0 * se + bias,
        Sided::TwoSided,
        v.len(),
    ))
}

/// Marginal law of `X_t` against `μ_t` at each time. One dimension: `W₁`
/// over the grid window against `tol + 2R·leak`. Two dimensions: largest
/// bump-expectation discrepancy against `tol + 4·stderr + leak`.
pub fn marginal_check(ens: &PathEnsemble, flow: &MarginalFlow, times: &[f64], tol: f64) -> Result<Vec<CheckReport>, PathsError> {
    let grid = *flow.grid();
    if grid.dim != ens.dim() {
        return Err(PathsError::InvalidArgument("flow and ensemble dimensions differ".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let r = ens.record_index(t)?;
        let (k, w) = flow.bracket(t)?;
        let density = flow.density_at(t)?;
        let leak = if w == 0.0 { flow.leak()[k] } else { (1.0 - w) * flow.leak()[k] + w * flow.leak()[k + 1] };
        let n = ens.n_valid();
        if grid.dim == 1 {
            let xs = ens.first_coordinates(r);
            let w1 = w1_samples_vs_grid(&xs, &grid, &density);
            let spread: f64 = (0..grid.n_cells)
                .map(|c| {
                    let gc = grid_cdf(&grid, &density, grid.axis_center(c));
                    (gc * (1.0 - gc)).max(0.0).sqrt() * grid.h()
                })
                .sum();
            out.push(CheckReport::new(
                format!("marginal-w1[t={t}]"),
                w1,
                spread / (n as f64).sqrt(),
                tol + 2.0 * grid.r_dom * leak,
                Sided::OneSided,
                n,
            ));
        } else {
            let (mut worst, mut worst_se) = (0.0f64, 0.0f64);
            for phi in builtin_bumps(grid.dim) {
                let v: Vec<f64> = ens.valid_paths().map(|i| phi.value(ens.state(i, r))).collect();
                let (m, se) = mean_stderr(&v);
                let exact = expectation_of(&grid, &density, |x| phi.value(x));
                worst = worst.max((m - exact).abs());
                worst_se = worst_se.max(se);
            }
            out.push(CheckReport::new(
                format!("marginal-bumps[t={t}]"),
                worst,
                worst_se,
                tol + 4.0 * worst_se + leak,
                Sided::OneSided,
                n,
            ));
        }
    }
    Ok(out)
}

/// Fraction of paths with `sup_k V(X_k) ≥ q` over the whole horizon, against
/// `bound + 4·stderr`. `V` must be radially nondecreasing, so the supremum is
/// attained where `|X_k|` is largest.
pub fn doob_empirical(ens: &PathEnsemble, lyap: &LyapunovSpec<f64>, q: f64, bound: f64) -> Result<CheckReport, PathsError> {
    if !(q > 0.0) {
        return Err(PathsError::InvalidArgument(format!("level q = {q} must be positive")));
    }
    if lyap.dim() != ens.dim() {
        return Err(PathsError::InvalidArgument("Lyapunov function and ensemble dimensions differ".into()));
    }
    let last = ens.record_times().len() - 1;
    let mut x = vec![0.0; ens.dim()];
    let hits: Vec<f64> = ens
        .valid_paths()
        .map(|i| {
            x[0] = ens.max_norm_sq(i, last).sqrt();
            if lyap.value(&x) >= q {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let n = hits.len();
    let p = pairwise_sum(&hits) / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    Ok(CheckReport::new(format!("doob[{}; q={q}]", lyap.label()), p, se, bound + 4.0 * se, Sided::OneSided, n))
}

/// `mean f(X_t) g(ω) - (sup g) ∫ f dμ_t ≤ 4·stderr` for `f ≥ 0` and
/// `0 ≤ g ≤ sup g`, with `g` read at conditioning time `t`.
pub fn lemma_ek1_check(
    ens: &PathEnsemble,
    flow: &MarginalFlow,
    f: &dyn Fn(&[f64]) -> f64,
    g: &GFunctional,
    t: f64,
) -> Result<CheckReport, PathsError> {
    let (g_inf, g_sup) = g.range();
    if g_inf < 0.0 {
        return Err(PathsError::InvalidArgument(format!("{} takes negative values", g.label())));
    }
    let r = ens.record_index(t)?;
    let gv = g.evaluate(ens, t)?;
    let mut v = Vec::with_capacity(ens.n_valid());
    for i in ens.valid_paths() {
        let fx = f(ens.state(i, r));
        if !(fx >= 0.0) {
            return Err(PathsError::InvalidArgument("f must be nonnegative".into()));
        }
        v.push(fx * gv[i]);
    }
    let (m, se) = mean_stderr(&v);
    let density = flow.density_at(t)?;
    let integral = expectation_of(flow.grid(), &density, f);
    Ok(CheckReport::new(format!("ek1[{}; t={t}]", g.label()), m - g_sup * integral, se, 4.0 * se, Sided::OneSided, v.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(12);
        let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13 && m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12 && (m(4) - 3.0).abs() < 1e-11 && (m(6) - 15.0).abs() < 1e-9);
    }

    #[test]
    fn report_sidedness() {
        assert!(!CheckReport::new("x", -2.0, 1.0, 1.0, Sided::TwoSided, 1).pass);
        assert!(CheckReport::new("x", -2.0, 1.0, 1.0, Sided::OneSided, 1).pass);
        assert_eq!(CheckReport::new("x", 0.0, 0.0, 0.0, Sided::TwoSided, 1).z(), 0.0);
    }

    #[test]
    fn suite_rule() {
        let ok = |z: f64| CheckReport::new("c", z, 1.0, 4.0, Sided::TwoSided, 10);
        let mut r: Vec<CheckReport> = (0..10).map(|k| ok(k as f64 * 0.3)).collect();
        assert!(suite_verdict(&r).pass);
        r[0] = ok(5.0);
        r[1] = ok(6.0);
        assert!(!suite_verdict(&r).pass);
    }

    #[test]
    fn pairwise_mean() {
        let v: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        let (m, _) = mean_stderr(&v);
        assert_eq!(m, 499.5);
    }
}
