use serde::{Deserialize, Serialize};

use super::{FpkError, Grid, MarginalFlow};

/// Parameters of the Gaussian oracles. The mean is `m0` along every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticParams {
    pub a: f64,
    pub theta: f64,
    pub m0: f64,
    pub v0: f64,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        Self { a: 1.0, theta: 1.0, m0: 0.0, v0: 1.0 }
    }
}

/// Closed-form Gaussian marginals for `heat-gaussian` (`A = aI`, `b = 0`) and
/// `ou-gaussian` (`A = aI`, `b = -θx`), sampled on `grid`.
pub fn analytic_flow(name: &str, p: &AnalyticParams, grid: &Grid, times: &[f64]) -> Result<MarginalFlow, FpkError> {
    if !(p.v0 > 0.0 && p.a >= 0.0) {
        return Err(FpkError::InvalidArgument("oracle needs v0 > 0 and a >= 0".into()));
    }
    let moments: Box<dyn Fn(f64) -> (f64, f64)> = match name {
        "heat-gaussian" => Box::new(move |t| (p.m0, p.v0 + 2.0 * p.a * t)),
        "ou-gaussian" => {
            if !(p.theta > 0.0) {
                return Err(FpkError::InvalidArgument("ou-gaussian needs theta > 0".into()));
            }
            let vinf = p.a / p.theta;
            Box::new(move |t| (p.m0 * (-p.theta * t).exp(), vinf + (p.v0 - vinf) * (-2.0 * p.theta * t).exp()))
        }
        other => return Err(FpkError::UnknownOracle(other.into())),
    };
    let mut dens = Vec::with_capacity(times.len());
    for &t in times {
        let (m, v) = moments(t);
        dens.push(grid.gaussian(&vec![m; grid.dim], v)?);
    }
    let k = times.len();
    MarginalFlow::new(*grid, times.to_vec(), dens, vec![0.0; k], vec![0.0; k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, Params};
    use crate::fpk::{l1_distance, solve_cauchy, Boundary};

    /// Forward Euler on `m' = -θm`, `v' = 2a - 2θv` with a tiny step.
    fn moment_ode(p: &AnalyticParams, t: f64) -> (f64, f64) {
        let n = 200_000;
        let dt = t / n as f64;
        let (mut m, mut v) = (p.m0, p.v0);
        for _ in 0..n {
            let (dm, dv) = (-p.theta * m, 2.0 * p.a - 2.0 * p.theta * v);
            m += dt * dm;
            v += dt * dv;
        }
        (m, v)
    }

    #[test]
    fn ou_transient_moments_match_ode() {
        let p = AnalyticParams { m0: 0.5, v0: 0.04, ..Default::default() };
        let (m, v) = moment_ode(&p, 1.0);
        assert!((m - 0.5 * (-1f64).exp()).abs() < 1e-5);
        assert!((v - (1.0 - 0.96 * (-2f64).exp())).abs() < 1e-5);
        let g = Grid::with_spacing(1, 8.0, 0.01, Boundary::Reflecting).unwrap();
        let flow = analytic_flow("ou-gaussian", &p, &g, &[0.0, 1.0]).unwrap();
        assert!((flow.expectation(1, |x| x[0]) - m).abs() < 1e-5);
    }

    #[test]
    fn stationary_ou_and_heat_start() {
        let g = Grid::with_spacing(1, 8.0, 0.02, Boundary::Reflecting).unwrap();
        let f = analytic_flow("ou-gaussian", &AnalyticParams::default(), &g, &[0.0, 0.7, 3.0]).unwrap();
        assert!(l1_distance(&g, f.density(0), f.density(2)) < 1e-14);
        let p = AnalyticParams { v0: 0.25, ..Default::default() };
        let h = analytic_flow("heat-gaussian", &p, &g, &[0.0]).unwrap();
        assert_eq!(h.density(0), &g.gaussian(&[0.0], 0.25).unwrap()[..]);
        assert!(matches!(analytic_flow("nope", &p, &g, &[0.0]), Err(FpkError::UnknownOracle(_))));
    }

    #[test]
    fn solver_matches_oracles() {
        let g = Grid::with_spacing(1, 8.0, 0.02, Boundary::Reflecting).unwrap();
        let heat = builtin_field("heat", &Params::new()).unwrap();
        let p = AnalyticParams { v0: 0.25, ..Default::default() };
        let num = solve_cauchy(&heat, &g.gaussian(&[0.0], 0.25).unwrap(), &g, &[0.0, 0.5], 0.4).unwrap();
        let ex = analytic_flow("heat-gaussian", &p, &g, &[0.0, 0.5]).unwrap();
        assert!(l1_distance(&g, num.density(1), ex.density(1)) <= 2e-3);

        let ou = builtin_field("ou", &Params::new()).unwrap();
        let num = solve_cauchy(&ou, &g.gaussian(&[0.0], 1.0).unwrap(), &g, &[0.0, 1.0], 0.4).unwrap();
        assert!(l1_distance(&g, num.density(1), num.density(0)) <= 2e-3);
    }

    #[test]
    fn halving_h_improves_heat_error() {
        let heat = builtin_field("heat", &Params::new()).unwrap();
        let p = AnalyticParams { v0: 0.25, ..Default::default() };
        let err = |h: f64| {
            let g = Grid::with_spacing(1, 8.0, h, Boundary::Reflecting).unwrap();
            let num = solve_cauchy(&heat, &g.gaussian(&[0.0], 0.25).unwrap(), &g, &[0.0, 0.5], 0.4).unwrap();
            let ex = analytic_flow("heat-gaussian", &p, &g, &[0.5]).unwrap();
            l1_distance(&g, num.density(1), ex.density(0))
        };
        let (coarse, fine) = (err(0.08), err(0.04));
        assert!(coarse / fine >= 1.7, "{coarse} {fine}");
    }
}
