use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::{apply_at_point, MollifiedPoint, MollifiedSystem};
use super::MollifyError;
use crate::coeffs::densities;
use crate::fpk::expectation_of;
use crate::linalg;
use crate::testfn::SmoothFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifyReport {
    pub epsilon: f64,
    pub delta: f64,
    pub horizon: f64,
    pub max_residual: f64,
    /// `(test label, t, residual)`.
    pub residuals: Vec<(String, f64, f64)>,
    /// `max |∫φ σ^ε(t) dx - ∫φ dμ^δ_t|` over tests and checked times.
    pub bump_distance: f64,
    /// `min σ^ε / (εγ)` over the sampled points; at least 1 in theory.
    pub min_floor_ratio: f64,
    /// Smallest eigenvalue of `𝒜_ε` over the sampled points.
    pub min_script_a_eig: f64,
    /// `max |∫σ^ε(t) dx - 1|` over the checked times.
    pub max_normalization_defect: f64,
}

/// Residuals `∫φσ^ε(t) - ∫φσ^ε(0) - ∫₀^t∫(𝓛_ε φ) σ^ε ds` for each test on a
/// uniform time grid of step about `time_step` (rounded to an even number of
/// intervals), reported at the even nodes where composite Simpson applies.
/// Space integrals are cell sums over the source grid.
pub fn verify_mollified(
    system: &MollifiedSystem,
    tests: &[&dyn SmoothFunction<f64>],
    time_step: f64,
) -> Result<MollifyReport, MollifyError> {
    let dens = system.density();
    let grid = *dens.grid();
    let d = grid.dim;
    let eps = dens.epsilon();
    let horizon = dens.horizon();
    if !(time_step > 0.0 && time_step <= horizon) {
        return Err(MollifyError::InvalidEpsilon(format!("time step {time_step} must lie in (0, {horizon}]")));
    }
    let mut supports = Vec::with_capacity(tests.len());
    for phi in tests {
        match phi.support() {
            Some((c, r)) if c.len() == d && grid.contains_ball(&c, r, 2.0) => supports.push((c, r)),
            _ => return Err(MollifyError::SupportEscape { label: phi.label() }),
        }
    }

    let cells: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let x = grid.center(k);
            supports.iter().any(|(c, r)| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r * r)
        })
        .collect();
    let xs: Vec<Vec<f64>> = cells.iter().map(|&k| grid.center(k)).collect();

    let mut n = (horizon / time_step).ceil() as usize;
    n += n % 2;
    let taus: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();

    // all mollified quantities on the (τ, x) evaluation set
    let rows: Vec<Vec<MollifiedPoint>> = taus
        .par_iter()
        .map(|&t| xs.iter().map(|x| system.point(t, x)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;

    let vol = grid.cell_volume();
    let mut min_floor_ratio = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    for (row, &t) in rows.iter().zip(&taus) {
        for (p, x) in row.iter().zip(&xs) {
            min_floor_ratio = min_floor_ratio.min(p.sigma / (eps * densities::gaussian(x)));
            let a = p.script_a();
            let e = linalg::min_eigenvalue(&a, d);
            if e < -1e-12 * linalg::operator_norm(&a, d).max(1.0) {
                return Err(MollifyError::NotPsd { t, x: x.clone(), min_eig: e });
            }
            min_eig = min_eig.min(e);
        }
    }

    let mut residuals = Vec::new();
    let mut max_residual = 0.0f64;
    let mut bump_distance = 0.0f64;
    let h = horizon / n as f64;
    for (phi, (c, r)) in tests.iter().zip(&supports) {
        let inside: Vec<bool> =
            xs.iter().map(|x| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < r * r).collect();
        let mut mass = Vec::with_capacity(taus.len());
        let mut gen = Vec::with_capacity(taus.len());
        for row in &rows {
            let (mut m, mut l) = (0.0, 0.0);
            for ((p, x), &keep) in row.iter().zip(&xs).zip(&inside) {
                if keep {
                    m += phi.value(x) * p.sigma;
                    l += apply_at_point(p, *phi, x) * p.sigma;
                }
            }
            mass.push(m * vol);
            gen.push(l * vol);
        }
        let mut acc = 0.0;
        for k in (0..=n).step_by(2) {
            if k > 0 {
                acc += h / 3.0 * (gen[k - 2] + 4.0 * gen[k - 1] + gen[k]);
            }
            let res = mass[k] - mass[0] - acc;
            if !res.is_finite() {
                return Err(MollifyError::NonFinite(format!("residual of {}", phi.label())));
            }
            max_residual = max_residual.max(res.abs());
            residuals.push((phi.label(), taus[k], res));

            let target = dens.source().density_at(taus[k] + dens.delta())?;
            let exact = expectation_of(&grid, &target, |x| phi.value(x));
            bump_distance = bump_distance.max((mass[k] - exact).abs());
        }
    }

    let max_normalization_defect = [0.0, 0.5 * horizon, horizon]
        .iter()
        .map(|&t| (dens.total_mass(t) - 1.0).abs())
        .fold(0.0, f64::max);

    Ok(MollifyReport {
        epsilon: eps,
        delta: dens.delta(),
        horizon,
        max_residual,
        residuals,
        bump_distance,
        min_floor_ratio,
        min_script_a_eig: min_eig,
        max_normalization_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, Params};
    use crate::fpk::{solve_cauchy, Boundary, Grid};
    use crate::mollify::{make_kernel, mollified_coeffs};
    use crate::testfn::{builtin_bumps, Bump, Zero};

    fn ou_transient() -> crate::fpk::MarginalFlow {
        let g = Grid::with_spacing(1, 8.0, 0.02, Boundary::Reflecting).unwrap();
        let f = builtin_field("ou", &Params::new()).unwrap();
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.005).collect();
        solve_cauchy(&f, &g.gaussian(&[0.5], 0.04).unwrap(), &g, &times, 0.4).unwrap()
    }

    #[test]
    fn ou_mollified_residual_is_small() {
        let flow = ou_transient();
        let f = builtin_field("ou", &Params::new()).unwrap();
        let sys = mollified_coeffs(&f, &flow, 0.5, make_kernel(0.1, 1).unwrap(), 1.0).unwrap();
        let bumps = builtin_bumps(1);
        let tests: Vec<&dyn SmoothFunction<f64>> = bumps.iter().take(5).map(|b| b as &dyn SmoothFunction<f64>).collect();
        let rep = verify_mollified(&sys, &tests, 0.01).unwrap();
        assert!(rep.max_residual <= 5e-3, "{}", rep.max_residual);
        assert!(rep.min_floor_ratio >= 1.0 && rep.min_script_a_eig >= 0.0);
        assert!(rep.max_normalization_defect <= 1e-4);

        let zero = Zero { dim: 1 };
        assert_eq!(verify_mollified(&sys, &[&zero], 0.05).unwrap().max_residual, 0.0);
        let edge = Bump::new(vec![7.9], 0.5);
        assert!(matches!(verify_mollified(&sys, &[&edge], 0.05), Err(MollifyError::SupportEscape { .. })));
    }
}
