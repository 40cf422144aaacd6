//! Conservative finite-volume scheme for `∂_t μ = ∂_i(∂_j(a^{ij} μ) - b^i μ)`.
//!
//! Face fluxes: central differences of `a^{ij} μ` (mixed terms averaged from
//! the two adjacent cells), upwinded `b μ` with a van Leer limited linear
//! reconstruction. Time stepping is two-stage Heun.

use serde::{Deserialize, Serialize};

use super::{Boundary, FpkError, Grid, MarginalFlow};
use crate::coeffs::CoefficientField;
use crate::linalg;

const EPS0: f64 = 1e-12;
const MASS_TOL: f64 = 1e-6;
const FLOOR_TOL: f64 = 1e-6;
const INIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Largest mass added by flooring in a single step.
    pub max_floor_per_step: f64,
}

struct Operator<'a> {
    field: &'a CoefficientField<f64>,
    grid: Grid,
    nx: usize,
    ny: usize,
    h: f64,
    reflecting: bool,
    a11: Vec<f64>,
    a12: Vec<f64>,
    a22: Vec<f64>,
    bx: Vec<f64>,
    by: Vec<f64>,
    max_norm_a: f64,
    max_b: f64,
    w11: Vec<f64>,
    w12: Vec<f64>,
    w22: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

#[inline]
fn van_leer(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

impl<'a> Operator<'a> {
    fn new(field: &'a CoefficientField<f64>, grid: Grid) -> Self {
        let nx = grid.n_cells;
        let ny = if grid.dim == 2 { nx } else { 1 };
        let n = nx * ny;
        let two = grid.dim == 2;
        Self {
            field,
            grid,
            nx,
            ny,
            h: grid.h(),
            reflecting: grid.boundary == Boundary::Reflecting,
            a11: vec![0.0; n],
            a12: vec![0.0; if two { n } else { 0 }],
            a22: vec![0.0; if two { n } else { 0 }],
            bx: vec![0.0; (nx + 1) * ny],
            by: vec![0.0; if two { nx * (ny + 1) } else { 0 }],
            max_norm_a: 0.0,
            max_b: 0.0,
            w11: vec![0.0; n],
            w12: vec![0.0; if two { n } else { 0 }],
            w22: vec![0.0; if two { n } else { 0 }],
            sx: vec![0.0; n],
            sy: vec![0.0; if two { n } else { 0 }],
            fx: vec![0.0; (nx + 1) * ny],
            fy: vec![0.0; if two { nx * (ny + 1) } else { 0 }],
        }
    }

    fn update_coefficients(&mut self, t: f64) -> Result<(), FpkError> {
        let d = self.grid.dim;
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut max_a = 0.0f64;
        for k in 0..self.nx * self.ny {
            self.grid.center_into(k, &mut x);
            self.field.diffusion_into(t, &x, &mut a);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(FpkError::NonFinite(format!("diffusion of {} at {x:?}", self.field.label())));
            }
            self.a11[k] = a[0];
            if d == 2 {
                self.a12[k] = 0.5 * (a[1] + a[2]);
                self.a22[k] = a[3];
            }
            max_a = max_a.max(linalg::operator_norm(&a, d));
        }
        let mut max_bx = 0.0f64;
        for j in 0..self.ny {
            for i in 0..=self.nx {
                x[0] = self.grid.axis_face(i);
                if d == 2 {
                    x[1] = self.grid.axis_center(j);
                }
                self.field.drift_into(t, &x, &mut b);
                self.bx[i + (self.nx + 1) * j] = b[0];
                max_bx = max_bx.max(b[0].abs());
            }
        }
        let mut max_by = 0.0f64;
        if d == 2 {
            for j in 0..=self.ny {
                for i in 0..self.nx {
                    x[0] = self.grid.axis_center(i);
                    x[1] = self.grid.axis_face(j);
                    self.field.drift_into(t, &x, &mut b);
                    self.by[i + self.nx * j] = b[1];
                    max_by = max_by.max(b[1].abs());
                }
            }
        }
        if !(max_bx.is_finite() && max_by.is_finite() && max_a.is_finite()) {
            return Err(FpkError::NonFinite(format!("drift of {} on the grid", self.field.label())));
        }
        self.max_norm_a = max_a;
        self.max_b = max_bx.hypot(max_by);
        Ok(())
    }

    fn stable_dt(&self, cfl: f64) -> f64 {
        let h = self.h;
        let d = self.grid.dim as f64;
        cfl * (h * h / (2.0 * d * self.max_norm_a + EPS0)).min(h / (self.max_b + EPS0))
    }

    /// Writes `∂_t μ` into `out` and returns the outflow rate through the boundary.
    fn rhs(&mut self, mu: &[f64], out: &mut [f64]) -> f64 {
        let (nx, ny, h) = (self.nx, self.ny, self.h);
        let two = self.grid.dim == 2;
        let idx = |i: usize, j: usize| i + nx * j;

        for k in 0..nx * ny {
            self.w11[k] = self.a11[k] * mu[k];
        }
        if two {
            for k in 0..nx * ny {
                self.w12[k] = self.a12[k] * mu[k];
                self.w22[k] = self.a22[k] * mu[k];
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let k = idx(i, j);
                self.sx[k] = if i == 0 || i + 1 == nx { 0.0 } else { van_leer(mu[k] - mu[k - 1], mu[k + 1] - mu[k]) };
                if two {
                    self.sy[k] =
                        if j == 0 || j + 1 == ny { 0.0 } else { van_leer(mu[k] - mu[k - nx], mu[k + nx] - mu[k]) };
                }
            }
        }

        // `∂_y w` at a cell with the boundary ghost convention.
        let reflecting = self.reflecting;
        let dy = |w: &[f64], i: usize, j: usize| -> f64 {
            let c = w[idx(i, j)];
            let lo = if j > 0 { w[idx(i, j - 1)] } else if reflecting { c } else { 0.0 };
            let hi = if j + 1 < ny { w[idx(i, j + 1)] } else if reflecting { c } else { 0.0 };
            (hi - lo) / (2.0 * h)
        };
        let dx = |w: &[f64], i: usize, j: usize| -> f64 {
            let c = w[idx(i, j)];
            let lo = if i > 0 { w[idx(i - 1, j)] } else if reflecting { c } else { 0.0 };
            let hi = if i + 1 < nx { w[idx(i + 1, j)] } else if reflecting { c } else { 0.0 };
            (hi - lo) / (2.0 * h)
        };

        let mut outflow = 0.0;
        let face_area = if two { h } else { 1.0 };

        // x-faces
        for j in 0..ny {
            for i in 0..=nx {
                let f = &mut self.fx[i + (nx + 1) * j];
                if (i == 0 || i == nx) && reflecting {
                    *f = 0.0;
                    continue;
                }
                let b = self.bx[i + (nx + 1) * j];
                let flux = if i == 0 {
                    let r = idx(0, j);
                    let cross = if two { 0.5 * dy(&self.w12, 0, j) } else { 0.0 };
                    -(self.w11[r] / h) - cross + if b < 0.0 { b * mu[r] } else { 0.0 }
                } else if i == nx {
                    let l = idx(nx - 1, j);
                    let cross = if two { 0.5 * dy(&self.w12, nx - 1, j) } else { 0.0 };
                    self.w11[l] / h - cross + if b > 0.0 { b * mu[l] } else { 0.0 }
                } else {
                    let (l, r) = (idx(i - 1, j), idx(i, j));
                    let cross = if two { 0.5 * (dy(&self.w12, i - 1, j) + dy(&self.w12, i, j)) } else { 0.0 };
                    let up = if b >= 0.0 { mu[l] + 0.5 * self.sx[l] } else { mu[r] - 0.5 * self.sx[r] };
                    -(self.w11[r] - self.w11[l]) / h - cross + b * up
                };
                *f = flux;
                if i == 0 {
                    outflow -= flux * face_area;
                } else if i == nx {
                    outflow += flux * face_area;
                }
            }
        }
        // y-faces
        if two {
            for j in 0..=ny {
                for i in 0..nx {
                    let f = &mut self.fy[i + nx * j];
                    if (j == 0 || j == ny) && reflecting {
                        *f = 0.0;
                        continue;
                    }
                    let b = self.by[i + nx * j];
                    let flux = if j == 0 {
                        let r = idx(i, 0);
                        -(self.w22[r] / h) - 0.5 * dx(&self.w12, i, 0) + if b < 0.0 { b * mu[r] } else { 0.0 }
                    } else if j == ny {
                        let l = idx(i, ny - 1);
                        self.w22[l] / h - 0.5 * dx(&self.w12, i, ny - 1) + if b > 0.0 { b * mu[l] } else { 0.0 }
                    } else {
                        let (l, r) = (idx(i, j - 1), idx(i, j));
                        let cross = 0.5 * (dx(&self.w12, i, j - 1) + dx(&self.w12, i, j));
                        let up = if b >= 0.0 { mu[l] + 0.5 * self.sy[l] } else { mu[r] - 0.5 * self.sy[r] };
                        -(self.w22[r] - self.w22[l]) / h - cross + b * up
                    };
                    *f = flux;
                    if j == 0 {
                        outflow -= flux * face_area;
                    } else if j == ny {
                        outflow += flux * face_area;
                    }
                }
            }
        }

        for j in 0..ny {
            for i in 0..nx {
                let mut v = -(self.fx[i + 1 + (nx + 1) * j] - self.fx[i + (nx + 1) * j]) / h;
                if two {
                    v -= (self.fy[i + nx * (j + 1)] - self.fy[i + nx * j]) / h;
                }
                out[idx(i, j)] = v;
            }
        }
        outflow
    }
}

/// Solves the Cauchy problem from `init` and records the density at each of
/// `output_times` (increasing, starting at 0). Steps are shortened to land
/// exactly on output times.
pub fn solve_cauchy(
    field: &CoefficientField<f64>,
    init: &[f64],
    grid: &Grid,
    output_times: &[f64],
    cfl_safety: f64,
) -> Result<MarginalFlow, FpkError> {
    solve_cauchy_with_stats(field, init, grid, output_times, cfl_safety).map(|(f, _)| f)
}

pub fn solve_cauchy_with_stats(
    field: &CoefficientField<f64>,
    init: &[f64],
    grid: &Grid,
    output_times: &[f64],
    cfl_safety: f64,
) -> Result<(MarginalFlow, SolveStats), FpkError> {
    grid.validate()?;
    if field.dim() != grid.dim {
        return Err(FpkError::DimensionMismatch { field: field.dim(), grid: grid.dim });
    }
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(FpkError::InvalidArgument(format!("cfl_safety must lie in (0, 1], got {cfl_safety}")));
    }
    if output_times.first() != Some(&0.0) || output_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FpkError::InvalidArgument("output times must start at 0 and increase".into()));
    }
    if init.len() != grid.len() || init.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(FpkError::InvalidInitial(format!("need {} finite nonnegative cell values", grid.len())));
    }
    let vol = grid.cell_volume();
    let m0 = init.iter().sum::<f64>() * vol;
    if (m0 - 1.0).abs() > INIT_TOL {
        return Err(FpkError::InvalidInitial(format!("initial mass {m0} differs from 1 by more than {INIT_TOL:e}")));
    }
    {
        // one fully checked evaluation per cell centre up front
        let mut x = vec![0.0; grid.dim];
        for k in 0..grid.len() {
            grid.center_into(k, &mut x);
            field.eval(0.0, &x)?;
        }
    }

    let horizon = *output_times.last().expect("nonempty");
    let n = grid.len();
    let mut op = Operator::new(field, *grid);
    op.update_coefficients(0.0)?;
    let autonomous = field.is_autonomous();

    let mut mu = init.to_vec();
    let mut k1 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let (mut leak, mut floored) = (0.0f64, 0.0f64);
    let mut stats = SolveStats { steps: 0, dt_min: f64::INFINITY, dt_max: 0.0, max_floor_per_step: 0.0 };

    let mut times = vec![0.0];
    let mut dens = vec![mu.clone()];
    let mut leaks = vec![0.0];
    let mut floors = vec![0.0];
    let max_steps = 200_000_000usize;

    let mut t = 0.0f64;
    for &target in &output_times[1..] {
        while t < target {
            if !autonomous {
                op.update_coefficients(t)?;
            }
            let dt_stable = op.stable_dt(cfl_safety);
            if !(dt_stable.is_finite() && dt_stable > 1e-14 * horizon.max(1.0)) || stats.steps >= max_steps {
                return Err(FpkError::CflBreakdown { t, dt: dt_stable });
            }
            let mut dt = dt_stable.min(target - t);
            if target - t - dt < 1e-9 * dt_stable {
                dt = target - t;
            }

            let out1 = op.rhs(&mu, &mut k1);
            for i in 0..n {
                stage[i] = mu[i] + dt * k1[i];
            }
            if !autonomous {
                op.update_coefficients(t + dt)?;
            }
            let out2 = op.rhs(&stage, &mut k1);
            let mut added = 0.0;
            for i in 0..n {
                let v = 0.5 * (mu[i] + stage[i] + dt * k1[i]);
                if v < 0.0 {
                    added -= v;
                    mu[i] = 0.0;
                } else {
                    mu[i] = v;
                }
            }
            added *= vol;
            if !added.is_finite() || mu.iter().any(|v| !v.is_finite()) {
                return Err(FpkError::CflBreakdown { t, dt });
            }
            if added > FLOOR_TOL {
                return Err(FpkError::NegativeDensityExcess { t, amount: added });
            }
            floored += added;
            leak += 0.5 * dt * (out1 + out2);
            t = if dt == target - t { target } else { t + dt };
            stats.steps += 1;
            stats.dt_min = stats.dt_min.min(dt);
            stats.dt_max = stats.dt_max.max(dt);
            stats.max_floor_per_step = stats.max_floor_per_step.max(added);

            if op.reflecting {
                // flooring is audited separately
                let m = mu.iter().sum::<f64>() * vol;
                if (m - floored - 1.0).abs() > MASS_TOL {
                    return Err(FpkError::MassLoss { t, mass: m });
                }
            }
        }
        times.push(target);
        dens.push(mu.clone());
        leaks.push(if op.reflecting { 0.0 } else { leak });
        floors.push(floored);
    }
    let flow = MarginalFlow::new(*grid, times, dens, leaks, floors)?;
    Ok((flow, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, ParamValue, Params};
    use crate::fpk::l1_distance;

    fn times(t: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t * k as f64 / n as f64).collect()
    }

    #[test]
    fn reflecting_conserves_mass() {
        let g = Grid::new(1, 4.0, 64, Boundary::Reflecting).unwrap();
        let f = builtin_field("cubic-confine", &Params::new()).unwrap();
        let init = g.gaussian(&[1.0], 0.3).unwrap();
        let flow = solve_cauchy(&f, &init, &g, &times(0.5, 5), 0.3).unwrap();
        for k in 0..flow.len() {
            assert!((flow.mass(k) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn absorbing_books_leak() {
        let g = Grid::new(1, 2.0, 64, Boundary::Absorbing).unwrap();
        let f = builtin_field("heat", &Params::new()).unwrap();
        let init = g.gaussian(&[0.0], 0.5).unwrap();
        let flow = solve_cauchy(&f, &init, &g, &times(1.0, 4), 0.3).unwrap();
        assert!(flow.leak()[4] > 0.1);
        for k in 0..flow.len() {
            assert!(flow.accounting_defect(k).abs() < 1e-8, "{}", flow.accounting_defect(k));
        }
    }

    #[test]
    fn two_dimensional_ou_stays_stationary() {
        let g = Grid::new(2, 6.0, 60, Boundary::Reflecting).unwrap();
        let f = builtin_field("ou", &Params::from([("dim".into(), ParamValue::Number(2.0))])).unwrap();
        let init = g.gaussian(&[0.0, 0.0], 1.0).unwrap();
        let flow = solve_cauchy(&f, &init, &g, &[0.0, 0.5], 0.3).unwrap();
        assert!(l1_distance(&g, flow.density(1), &init) < 2e-2);
    }

    #[test]
    fn cross_diffusion_conserves_mass() {
        let g = Grid::new(2, 4.0, 40, Boundary::Reflecting).unwrap();
        let f = CoefficientField::<f64>::new(
            2,
            "sheared",
            |_, _, o: &mut [f64]| o.copy_from_slice(&[1.0, 0.3, 0.3, 0.8]),
            |_, x: &[f64], o: &mut [f64]| {
                o[0] = -x[0];
                o[1] = -x[1];
            },
        );
        let init = g.gaussian(&[0.0, 0.0], 0.5).unwrap();
        let flow = solve_cauchy(&f, &init, &g, &[0.0, 0.25, 0.5], 0.3).unwrap();
        assert!(flow.accounting_defect(2).abs() < 1e-10);
        assert!(flow.floored()[2] < 1e-4, "{}", flow.floored()[2]);
        // covariance grows along the shear direction
        let cov = flow.expectation(2, |x| x[0] * x[1]);
        assert!(cov > 0.02, "{cov}");
    }

    #[test]
    fn rejects_bad_initial_mass() {
        let g = Grid::new(1, 4.0, 64, Boundary::Reflecting).unwrap();
        let f = builtin_field("heat", &Params::new()).unwrap();
        let init = vec![1.0; 64];
        assert!(matches!(solve_cauchy(&f, &init, &g, &[0.0, 1.0], 0.3), Err(FpkError::InvalidInitial(_))));
    }

    #[test]
    fn blow_up_is_a_cfl_breakdown() {
        let g = Grid::new(1, 4.0, 64, Boundary::Reflecting).unwrap();
        let f = CoefficientField::<f64>::isotropic(1, "huge", 1e300, |_, _, o: &mut [f64]| o.fill(0.0));
        let init = g.gaussian(&[0.0], 1.0).unwrap();
        assert!(matches!(solve_cauchy(&f, &init, &g, &[0.0, 1.0], 0.3), Err(FpkError::CflBreakdown { .. })));
    }
}
