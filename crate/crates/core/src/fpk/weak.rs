use serde::{Deserialize, Serialize};

use super::{FpkError, MarginalFlow};
use crate::coeffs::CoefficientField;
use crate::testfn::{apply_generator_with, SmoothFunction, Workspace};

/// Residuals of `∫φ dμ_t - ∫φ dν - ∫₀^t∫Lφ dμ_s ds` at every flow node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub max_abs: f64,
    /// `(test label, t, residual)` in test-major order.
    pub entries: Vec<(String, f64, f64)>,
}

pub fn weak_residual(
    flow: &MarginalFlow,
    field: &CoefficientField<f64>,
    tests: &[&dyn SmoothFunction<f64>],
) -> Result<WeakResidual, FpkError> {
    let grid = flow.grid();
    if field.dim() != grid.dim {
        return Err(FpkError::DimensionMismatch { field: field.dim(), grid: grid.dim });
    }
    let mut entries = Vec::new();
    let mut max_abs = 0.0f64;
    let mut ws = Workspace::new(grid.dim);
    let mut x = vec![0.0; grid.dim];
    for phi in tests {
        let escapes = match phi.support() {
            Some((c, r)) => c.len() != grid.dim || !grid.contains_ball(&c, r, 2.0),
            None => true,
        };
        if escapes {
            return Err(FpkError::SupportEscape { label: phi.label() });
        }
        // φ and Lφ on cells, restricted to where φ's support reaches
        let (c, r) = phi.support().expect("checked");
        let cells: Vec<usize> = (0..grid.len())
            .filter(|&k| {
                grid.center_into(k, &mut x);
                x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r * r
            })
            .collect();
        let vol = grid.cell_volume();
        let phi_vals: Vec<f64> = cells
            .iter()
            .map(|&k| {
                grid.center_into(k, &mut x);
                phi.value(&x)
            })
            .collect();
        let mut l_nodes = Vec::with_capacity(flow.len());
        let mut phi_nodes = Vec::with_capacity(flow.len());
        for (n, &t) in flow.times().iter().enumerate() {
            let rho = flow.density(n);
            let (mut lp, mut pp) = (0.0, 0.0);
            for (j, &k) in cells.iter().enumerate() {
                grid.center_into(k, &mut x);
                lp += apply_generator_with(field, *phi, t, &x, &mut ws) * rho[k];
                pp += phi_vals[j] * rho[k];
            }
            if !(lp.is_finite() && pp.is_finite()) {
                return Err(FpkError::NonFinite(format!("generator of {} at t={t}", phi.label())));
            }
            l_nodes.push(lp * vol);
            phi_nodes.push(pp * vol);
        }
        let mut acc = 0.0;
        for n in 0..flow.len() {
            if n > 0 {
                let dt = flow.times()[n] - flow.times()[n - 1];
                acc += 0.5 * dt * (l_nodes[n] + l_nodes[n - 1]);
            }
            let res = phi_nodes[n] - phi_nodes[0] - acc;
            max_abs = max_abs.max(res.abs());
            entries.push((phi.label(), flow.times()[n], res));
        }
    }
    Ok(WeakResidual { max_abs, entries })
}

/// `∫₀^T ∫ f(t,x) μ_t(dx) dt`: midpoint in space, trapezoid over the flow nodes.
pub fn flow_integral(flow: &MarginalFlow, integrand: impl Fn(f64, &[f64]) -> f64) -> Result<f64, FpkError> {
    let grid = flow.grid();
    let mut x = vec![0.0; grid.dim];
    let mut prev: Option<(f64, f64)> = None;
    let mut acc = 0.0;
    for (n, &t) in flow.times().iter().enumerate() {
        let mut s = 0.0;
        for (k, &p) in flow.density(n).iter().enumerate() {
            if p != 0.0 {
                grid.center_into(k, &mut x);
                s += integrand(t, &x) * p;
            }
        }
        s *= grid.cell_volume();
        if !s.is_finite() {
            return Err(FpkError::NonFinite(format!("flow integrand at t={t}")));
        }
        if let Some((t0, s0)) = prev {
            acc += 0.5 * (t - t0) * (s + s0);
        }
        prev = Some((t, s));
    }
    Ok(acc)
}
