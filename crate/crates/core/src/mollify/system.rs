use serde::{Deserialize, Serialize};

use super::kernel::{eta, zeta_derivative, MollifierKernel};
use super::MollifyError;
use crate::coeffs::{densities, CoefficientField};
use crate::fpk::{FpkError, Grid, MarginalFlow};
use crate::linalg;
use crate::scalar::{dot, norm_sq};
use crate::testfn::SmoothFunction;

const NORMALIZATION_TOL: f64 = 1e-4;

/// `μ^δ_t = μ_{t+δ}`.
pub fn shift_flow(flow: &MarginalFlow, delta: f64) -> Result<MarginalFlow, MollifyError> {
    flow.shifted(delta).map_err(|e| match e {
        FpkError::TimeNotCovered { .. } => MollifyError::HorizonTooShort { need: delta, have: flow.horizon() },
        other => other.into(),
    })
}

/// `σ^ε(t,x) = εγ(x) + (1-ε) ∫∫ h_ε(t-s, x-y) μ^δ_s(dy) ds` on `t ∈ [0, T]`.
///
/// The source flow is kept unshifted; `μ^δ_s` is its state at `s + δ`,
/// linear in time between nodes and constant on cells. Kernel weights are
/// integrated over each cell and each time interval by sub-sampling at
/// `SUBSAMPLE` points per `ε`.
#[derive(Debug, Clone)]
pub struct SmoothedDensity {
    source: MarginalFlow,
    delta: f64,
    horizon: f64,
    kernel: MollifierKernel,
    space_sub: usize,
}

const SUBSAMPLE: f64 = 24.0;

/// Builds `σ^ε` on `[0, horizon]`. Requires `√2 ε < δ` and a source flow
/// covering `[0, horizon + δ + √2 ε]`; checks `∫σ^ε dx = 1` at `t = 0, T/2, T`.
pub fn mollify_flow(
    source: &MarginalFlow,
    delta: f64,
    kernel: MollifierKernel,
    horizon: f64,
) -> Result<SmoothedDensity, MollifyError> {
    let r = kernel.support_radius();
    if kernel.dim != source.grid().dim {
        return Err(FpkError::DimensionMismatch { field: kernel.dim, grid: source.grid().dim }.into());
    }
    if !(delta > 0.0 && r < delta) {
        return Err(MollifyError::InvalidEpsilon(format!(
            "need √2·ε < δ, got ε = {}, δ = {delta}",
            kernel.epsilon
        )));
    }
    if !(horizon > 0.0) {
        return Err(MollifyError::InvalidEpsilon(format!("horizon {horizon} must be positive")));
    }
    let need = horizon + delta + r;
    if source.times()[0] > 0.0 || source.horizon() < need {
        return Err(MollifyError::HorizonTooShort { need, have: source.horizon() });
    }
    let space_sub = (SUBSAMPLE * source.grid().h() / kernel.epsilon).ceil().max(1.0) as usize;
    let s = SmoothedDensity { source: source.clone(), delta, horizon, kernel, space_sub };
    for t in [0.0, 0.5 * horizon, horizon] {
        let mass = s.total_mass(t);
        if !((mass - 1.0).abs() <= NORMALIZATION_TOL) {
            return Err(MollifyError::NormalizationDrift { t, mass });
        }
    }
    Ok(s)
}

/// Index range of cells along one axis whose centres lie within `r` of `x`.
fn axis_range(grid: &Grid, x: f64, r: f64) -> Option<(usize, usize)> {
    let h = grid.h();
    let lo = ((x - r + grid.r_dom) / h - 0.5).ceil().max(0.0);
    let hi = ((x + r + grid.r_dom) / h - 0.5).floor().min(grid.n_cells as f64 - 1.0);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

impl SmoothedDensity {
    pub fn epsilon(&self) -> f64 {
        self.kernel.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kernel(&self) -> &MollifierKernel {
        &self.kernel
    }

    pub fn source(&self) -> &MarginalFlow {
        &self.source
    }

    pub fn grid(&self) -> &Grid {
        self.source.grid()
    }

    /// `(node, ∫ g(t - s) φ_node(s + δ) ds)` for the hat functions `φ_node` of
    /// the source time grid, where `g` vanishes outside `(-√2ε, √2ε)`.
    fn node_weights(&self, t: f64, g: impl Fn(f64) -> f64) -> Vec<(usize, f64)> {
        let r = self.kernel.support_radius();
        let times = self.source.times();
        let (a, b) = (t + self.delta - r, t + self.delta + r);
        let first = times.partition_point(|&u| u <= a).saturating_sub(1);
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut push = |node: usize, w: f64| match out.last_mut() {
            Some((n, acc)) if *n == node => *acc += w,
            _ => out.push((node, w)),
        };
        for j in first..times.len().saturating_sub(1) {
            let (u0, u1) = (times[j], times[j + 1]);
            if u0 >= b {
                break;
            }
            if u1 <= a {
                continue;
            }
            let len = u1 - u0;
            let m = (SUBSAMPLE * len / self.kernel.epsilon).ceil().max(1.0) as usize;
            let (mut w0, mut w1) = (0.0, 0.0);
            for q in 0..m {
                let frac = (q as f64 + 0.5) / m as f64;
                let k = g(t - (u0 + frac * len - self.delta)) * len / m as f64;
                w0 += k * (1.0 - frac);
                w1 += k * frac;
            }
            push(j, w0);
            push(j + 1, w1);
        }
        out.retain(|&(_, w)| w != 0.0);
        out
    }

    /// `(cell, centre, ∫_cell g(|x - y|²) dy)` over cells meeting the ball of
    /// radius `√2ε` around `x`, for `g` vanishing outside it.
    fn cell_weights(&self, x: &[f64], g: impl Fn(f64) -> f64) -> Vec<(usize, Vec<f64>, f64)> {
        let grid = self.source.grid();
        let h = grid.h();
        let r = self.kernel.support_radius() + 0.5 * h;
        let Some((i0, i1)) = axis_range(grid, x[0], r) else { return Vec::new() };
        let (j0, j1) = if grid.dim == 2 {
            match axis_range(grid, x[1], r) {
                Some(v) => v,
                None => return Vec::new(),
            }
        } else {
            (0, 0)
        };
        let m = self.space_sub;
        let sub_vol = grid.cell_volume() / (m as f64).powi(grid.dim as i32);
        let offs: Vec<f64> = (0..m).map(|q| ((q as f64 + 0.5) / m as f64 - 0.5) * h).collect();
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let mut c = vec![grid.axis_center(i)];
                if grid.dim == 2 {
                    c.push(grid.axis_center(j));
                }
                let mut w = 0.0;
                if grid.dim == 1 {
                    for &ox in &offs {
                        let dx = x[0] - c[0] - ox;
                        w += g(dx * dx);
                    }
                } else {
                    for &oy in &offs {
                        let dy = x[1] - c[1] - oy;
                        for &ox in &offs {
                            let dx = x[0] - c[0] - ox;
                            w += g(dx * dx + dy * dy);
                        }
                    }
                }
                if w != 0.0 {
                    out.push((i + grid.n_cells * j, c, w * sub_vol));
                }
            }
        }
        out
    }

    /// Visits `(node, cell, y, kernel weight, μ)` over the kernel support
    /// around `(t, x)`, in index order.
    fn for_each_in_support(&self, t: f64, x: &[f64], mut f: impl FnMut(usize, usize, &[f64], f64, f64)) {
        let cells = self.cell_weights(x, |r2| self.kernel.space_factor(r2));
        if cells.is_empty() {
            return;
        }
        for (node, wt) in self.node_weights(t, |s| self.kernel.time_factor(s)) {
            let rho = self.source.density(node);
            for (cell, y, ws) in &cells {
                let m = rho[*cell];
                if m != 0.0 {
                    f(node, *cell, y, wt * ws, m);
                }
            }
        }
    }

    /// `∫∫ h_ε(t-s, x-y) μ^δ_s(dy) ds`.
    pub fn convolution(&self, t: f64, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_in_support(t, x, |_, _, _, w, m| acc += w * m);
        acc
    }

    pub fn sigma(&self, t: f64, x: &[f64]) -> f64 {
        let e = self.kernel.epsilon;
        e * densities::gaussian(x) + (1.0 - e) * self.convolution(t, x)
    }

    /// `∫σ^ε(t, x) dx` by the cell sum over the source grid.
    pub fn total_mass(&self, t: f64) -> f64 {
        let g = self.source.grid();
        let mut x = vec![0.0; g.dim];
        let mut acc = 0.0;
        for k in 0..g.len() {
            g.center_into(k, &mut x);
            acc += self.sigma(t, &x);
        }
        acc * g.cell_volume()
    }

    /// `∫ f σ^ε(t,·) dx` by the cell sum over the source grid, skipping cells
    /// outside `support` when given.
    pub fn integrate(&self, t: f64, f: &dyn Fn(&[f64]) -> f64, support: Option<(&[f64], f64)>) -> f64 {
        let g = self.source.grid();
        let mut x = vec![0.0; g.dim];
        let mut acc = 0.0;
        for k in 0..g.len() {
            g.center_into(k, &mut x);
            if let Some((c, r)) = support {
                if x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= r * r {
                    continue;
                }
            }
            acc += f(&x) * self.sigma(t, &x);
        }
        acc * g.cell_volume()
    }
}

/// Everything `𝓛_ε` needs at one `(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifiedPoint {
    pub sigma: f64,
    /// `∫∫ h_ε μ^δ`.
    pub convolution: f64,
    /// `(1-ε) ∫∫ b_δ h_ε μ^δ`, i.e. `β_ε σ^ε`.
    pub beta_sigma: Vec<f64>,
    /// `(1-ε) ∫∫ a_δ h_ε μ^δ`, i.e. `α_ε σ^ε`.
    pub alpha_sigma: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `εγ(x)/σ^ε(t,x)`.
    pub gauss_weight: f64,
}

impl MollifiedPoint {
    /// `𝒜_ε = α_ε + (εγ/σ^ε) I`.
    pub fn script_a(&self) -> Vec<f64> {
        let d = self.beta.len();
        let mut a = self.alpha.clone();
        for i in 0..d {
            a[i * d + i] += self.gauss_weight;
        }
        a
    }
}

/// `W₁`, `W₂`, `W₃` dominating `⟨β_ε, x⟩/(1+|x|²)` and `|α_ε^{ij}|/(1+|x|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominatingTerms {
    pub w1: f64,
    /// Largest entry-wise bound over `(i, j)`.
    pub w2: f64,
    pub w3: f64,
}

/// `σ^ε` together with the mollified coefficients of a field.
#[derive(Debug, Clone)]
pub struct MollifiedSystem {
    density: SmoothedDensity,
    field: CoefficientField<f64>,
    /// Per-cell `(A, b)` for autonomous fields.
    cache: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn mollified_coeffs(
    field: &CoefficientField<f64>,
    source: &MarginalFlow,
    delta: f64,
    kernel: MollifierKernel,
    horizon: f64,
) -> Result<MollifiedSystem, MollifyError> {
    if field.dim() != source.grid().dim {
        return Err(FpkError::DimensionMismatch { field: field.dim(), grid: source.grid().dim }.into());
    }
    let density = mollify_flow(source, delta, kernel, horizon)?;
    let cache = if field.is_autonomous() {
        let g = source.grid();
        let d = g.dim;
        let mut a = vec![0.0; g.len() * d * d];
        let mut b = vec![0.0; g.len() * d];
        let mut x = vec![0.0; d];
        for k in 0..g.len() {
            g.center_into(k, &mut x);
            let (ak, bk) = field.eval(0.0, &x)?;
            a[k * d * d..(k + 1) * d * d].copy_from_slice(&ak);
            b[k * d..(k + 1) * d].copy_from_slice(&bk);
        }
        Some((a, b))
    } else {
        None
    };
    Ok(MollifiedSystem { density, field: field.clone(), cache })
}

impl MollifiedSystem {
    pub fn density(&self) -> &SmoothedDensity {
        &self.density
    }

    pub fn field(&self) -> &CoefficientField<f64> {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// Calls `f(node, y, A_δ, b_δ, weight · μ)` over the kernel support.
    fn visit_weighted(&self, t: f64, x: &[f64], mut f: impl FnMut(usize, &[f64], &[f64], &[f64], f64)) {
        let d = self.dim();
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let times = self.density.source.times();
        self.density.for_each_in_support(t, x, |node, cell, y, w, m| match &self.cache {
            Some((ca, cb)) => f(node, y, &ca[cell * d * d..(cell + 1) * d * d], &cb[cell * d..(cell + 1) * d], w * m),
            None => {
                // A_δ(s, y) = A(s + δ, y) with s + δ the source node time
                let u = times[node];
                self.field.diffusion_into(u, y, &mut a);
                self.field.drift_into(u, y, &mut b);
                f(node, y, &a, &b, w * m)
            }
        });
    }

    pub fn point(&self, t: f64, x: &[f64]) -> Result<MollifiedPoint, MollifyError> {
        let d = self.dim();
        let e = self.density.kernel.epsilon;
        let mut conv = 0.0;
        let mut ka = vec![0.0; d * d];
        let mut kb = vec![0.0; d];
        self.visit_weighted(t, x, |_, _, a, b, wm| {
            conv += wm;
            for (o, v) in ka.iter_mut().zip(a) {
                *o += v * wm;
            }
            for (o, v) in kb.iter_mut().zip(b) {
                *o += v * wm;
            }
        });
        let sigma = e * densities::gaussian(x) + (1.0 - e) * conv;
        let alpha_sigma: Vec<f64> = ka.iter().map(|v| (1.0 - e) * v).collect();
        let beta_sigma: Vec<f64> = kb.iter().map(|v| (1.0 - e) * v).collect();
        let p = MollifiedPoint {
            sigma,
            convolution: conv,
            beta: beta_sigma.iter().map(|v| v / sigma).collect(),
            alpha: alpha_sigma.iter().map(|v| v / sigma).collect(),
            beta_sigma,
            alpha_sigma,
            gauss_weight: e * densities::gaussian(x) / sigma,
        };
        if !(sigma > 0.0) || p.alpha.iter().chain(&p.beta).any(|v| !v.is_finite()) {
            return Err(MollifyError::NonFinite(format!("mollified coefficients at t={t}, x={x:?}")));
        }
        Ok(p)
    }

    pub fn sigma(&self, t: f64, x: &[f64]) -> f64 {
        self.density.sigma(t, x)
    }

    pub fn beta(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, MollifyError> {
        Ok(self.point(t, x)?.beta)
    }

    pub fn alpha(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, MollifyError> {
        Ok(self.point(t, x)?.alpha)
    }

    pub fn gauss_weight(&self, t: f64, x: &[f64]) -> f64 {
        self.density.epsilon() * densities::gaussian(x) / self.sigma(t, x)
    }

    /// `𝒜_ε(t, x)`, checked for positive semidefiniteness.
    pub fn script_a(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, MollifyError> {
        let a = self.point(t, x)?.script_a();
        let d = self.dim();
        let min_eig = linalg::min_eigenvalue(&a, d);
        if min_eig < -1e-12 * linalg::operator_norm(&a, d).max(1.0) {
            return Err(MollifyError::NotPsd { t, x: x.to_vec(), min_eig });
        }
        Ok(a)
    }

    /// The three dominating functions at `(t, x)`, each computed by its own
    /// kernel-weighted sum.
    pub fn dominating_terms(&self, t: f64, x: &[f64]) -> DominatingTerms {
        let d = self.dim();
        let k = &self.density.kernel;
        let e = k.epsilon;
        let sigma = self.sigma(t, x);
        let mut drift_part = 0.0;
        let mut trace_part = 0.0;
        let mut entry = vec![0.0; d * d];
        self.visit_weighted(t, x, |_, y, a, b, wm| {
            let damp = 1.0 + norm_sq(y);
            drift_part += dot(b, y).abs() / damp * wm;
            trace_part += linalg::trace(a, d) / damp * wm;
            for (o, v) in entry.iter_mut().zip(a) {
                *o += v.abs() / damp * wm;
            }
        });
        // time-derivative part: c₁c₂ε^{-d-1} ∫∫ |t-s| |ζ'(|t-s|²/ε²)| η(|x-y|²/ε²) μ^δ_s(dy) ds
        let mut shift_part = 0.0;
        {
            let pref = k.c1 * k.c2 * e.powi(-(d as i32) - 1);
            let cells = self.density.cell_weights(x, |r2| eta(r2 / (e * e)));
            let nodes = self.density.node_weights(t, |s| s.abs() * zeta_derivative(s * s / (e * e)).abs());
            for (node, wt) in nodes {
                let rho = self.density.source.density(node);
                for (cell, _, ws) in &cells {
                    shift_part += pref * wt * ws * rho[*cell];
                }
            }
        }
        // the ζ(t²)ζ(|x|²) sums above carry c₁c₂ε^{-d-1} through the kernel
        let w1 = (3.0 * drift_part + shift_part + 3.0 * trace_part) / sigma;
        let w2 = 3.0 * entry.iter().fold(0.0f64, |m, v| m.max(*v)) / sigma;
        let w3 = e * densities::gaussian(x) / ((1.0 + norm_sq(x)) * sigma);
        DominatingTerms { w1, w2, w3 }
    }
}

/// `𝓛_ε u = trace(α_ε D²u) + ⟨β_ε, ∇u⟩ + (εγ/σ^ε)(Δu - ⟨x, ∇u⟩)`.
pub fn apply_mollified_l(
    system: &MollifiedSystem,
    u: &dyn SmoothFunction<f64>,
    t: f64,
    x: &[f64],
) -> Result<f64, MollifyError> {
    let p = system.point(t, x)?;
    Ok(apply_at_point(&p, u, x))
}

pub(super) fn apply_at_point(p: &MollifiedPoint, u: &dyn SmoothFunction<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    u.gradient(x, &mut grad);
    u.hessian(x, &mut hess);
    let lap = linalg::trace(&hess, d);
    linalg::frobenius_inner(&p.alpha, &hess) + dot(&p.beta, &grad) + p.gauss_weight * (lap - dot(x, &grad))
}
