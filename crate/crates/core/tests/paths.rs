use fpklab::coeffs::{builtin_field, CoefficientField, Params};
use fpklab::fpk::{solve_cauchy, Boundary, Grid, MarginalFlow};
use fpklab::lyapunov::{dirichlet_integral, doob_bound, LyapunovSpec};
use fpklab::paths::*;
use fpklab::testfn::{builtin_bumps, Bump, SmoothFunction};

fn ou() -> CoefficientField<f64> {
    builtin_field("ou", &Params::new()).unwrap()
}

fn cfg(n: usize, dt: f64, horizon: f64, seed: u64, stride: usize) -> SimConfig {
    SimConfig { n_paths: n, dt, horizon, seed, record_stride: stride }
}

fn ou_flow(grid: Grid, init: &[f64], times: &[f64]) -> MarginalFlow {
    solve_cauchy(&ou(), init, &grid, times, 0.4).unwrap()
}

#[test]
fn constant_paths_give_zero_martingale_statistic() {
    let f = CoefficientField::<f64>::zero(1);
    let law = InitialLaw::Gaussian { mean: vec![0.0], var: 1.0 };
    let bumps = builtin_bumps(1);
    let tracked: Vec<Tracked> = bumps.iter().map(|b| Tracked::new(b)).collect();
    let ens = simulate(&f, &law, &cfg(1000, 1e-2, 1.0, 1, 25), &tracked).unwrap();
    for b in &bumps {
        for g in GFunctional::registry() {
            let r = martingale_check(&ens, &f, b, &g, 0.5, 1.0).unwrap();
            assert_eq!(r.statistic, 0.0);
            assert!(r.pass);
        }
    }
}

#[test]
fn ou_martingale_passes_and_drift_mismatch_fails() {
    let f = ou();
    let flipped = f.with_reversed_drift();
    let law = InitialLaw::Gaussian { mean: vec![0.0], var: 1.0 };
    let bump = Bump::new(vec![0.5], 1.5);
    let tracked = [Tracked::new(&bump)];
    let ens = simulate(&f, &law, &cfg(20_000, 1e-3, 1.0, 7, 250), &tracked).unwrap();
    let one = GFunctional::Constant { c: 1.0 };
    let r = martingale_check(&ens, &f, &bump, &one, 0.0, 1.0).unwrap();
    assert!(r.pass, "{r:?}");

    let wrong = [Tracked::with_generator(&bump, &flipped)];
    let ens = simulate(&f, &law, &cfg(20_000, 1e-3, 1.0, 7, 250), &wrong).unwrap();
    let r = martingale_check(&ens, &flipped, &bump, &one, 0.0, 1.0).unwrap();
    assert!(!r.pass, "{r:?}");
}

#[test]
fn untracked_function_is_rejected() {
    let ens = simulate(&ou(), &InitialLaw::Dirac { point: vec![0.0] }, &cfg(1000, 1e-2, 0.5, 1, 10), &[]).unwrap();
    let b = Bump::new(vec![0.0], 1.0);
    let g = GFunctional::Constant { c: 1.0 };
    assert!(matches!(martingale_check(&ens, &ou(), &b, &g, 0.0, 0.5), Err(PathsError::NotTracked(_))));
    let late = GFunctional::Cos { at: Observation::Fraction(1.5), freq: 1.0 };
    assert!(matches!(late.evaluate(&ens, 0.2), Err(PathsError::NotAdapted { .. })));
}

#[test]
fn initial_law_accepts_the_truth_and_rejects_a_shift() {
    let f = ou();
    let law = InitialLaw::Gaussian { mean: vec![0.0], var: 1.0 };
    let ens = simulate(&f, &law, &cfg(100_000, 1e-2, 0.01, 3, 1), &[]).unwrap();
    assert!(initial_law_check(&ens, &law).unwrap().pass);
    let shifted = InitialLaw::Gaussian { mean: vec![0.5], var: 1.0 };
    assert!(!initial_law_check(&ens, &shifted).unwrap().pass);

    let dirac = InitialLaw::Dirac { point: vec![0.0] };
    let ens = simulate(&f, &dirac, &cfg(1000, 1e-2, 0.01, 3, 1), &[]).unwrap();
    let r = initial_law_check(&ens, &dirac).unwrap();
    assert!(r.pass && r.statistic == 0.0);
}

#[test]
fn initial_law_in_two_dimensions() {
    let f = CoefficientField::<f64>::zero(2);
    let law = InitialLaw::Gaussian { mean: vec![0.2, -0.1], var: 0.5 };
    let ens = simulate(&f, &law, &cfg(20_000, 1e-2, 0.01, 5, 1), &[]).unwrap();
    assert!(initial_law_check(&ens, &law).unwrap().pass);
    let wrong = InitialLaw::Gaussian { mean: vec![0.7, -0.1], var: 0.5 };
    assert!(!initial_law_check(&ens, &wrong).unwrap().pass);
}

#[test]
fn self_coupled_marginal_is_close() {
    let g = Grid::with_spacing(1, 8.0, 0.02, Boundary::Reflecting).unwrap();
    let dens = g.gaussian(&[0.3], 0.7).unwrap();
    let flow = MarginalFlow::stationary(g, dens.clone(), vec![0.0, 1.0]).unwrap();
    let law = InitialLaw::GridDensity { grid: g, density: dens };
    let ens = simulate(&CoefficientField::zero(1), &law, &cfg(100_000, 1e-2, 1.0, 2, 100), &[]).unwrap();
    let reps = marginal_check(&ens, &flow, &[0.0, 1.0], 0.01).unwrap();
    assert!(reps.iter().all(|r| r.pass), "{reps:?}");
}

#[test]
fn point_mass_marginal_is_within_grid_resolution() {
    let g = Grid::with_spacing(1, 4.0, 0.05, Boundary::Reflecting).unwrap();
    let mut dens = vec![0.0; g.len()];
    // the cell whose left face is 0
    dens[g.n_cells / 2] = 1.0 / g.h();
    let flow = MarginalFlow::stationary(g, dens, vec![0.0, 1.0]).unwrap();
    let ens = simulate(&CoefficientField::zero(1), &InitialLaw::Dirac { point: vec![0.0] }, &cfg(1000, 1e-2, 1.0, 2, 100), &[])
        .unwrap();
    let r = &marginal_check(&ens, &flow, &[1.0], g.h()).unwrap()[0];
    assert!(r.pass && r.statistic <= g.h(), "{r:?}");
    assert!(matches!(marginal_check(&ens, &flow, &[0.5], 0.1), Err(PathsError::TimeNotCovered { .. })));
}

#[test]
fn ou_marginal_matches_solver() {
    let g = Grid::with_spacing(1, 8.0, 0.02, Boundary::Reflecting).unwrap();
    let times: Vec<f64> = (0..=4).map(|k| 0.25 * k as f64).collect();
    let flow = ou_flow(g, &g.gaussian(&[0.5], 0.04).unwrap(), &times);
    let law = InitialLaw::Gaussian { mean: vec![0.5], var: 0.04 };
    let ens = simulate(&ou(), &law, &cfg(40_000, 1e-3, 1.0, 9, 250), &[]).unwrap();
    let reps = marginal_check(&ens, &flow, &times, 0.02).unwrap();
    assert!(reps.iter().all(|r| r.pass), "{reps:?}");
}

#[test]
fn doob_bound_holds_and_trivial_cases() {
    let g = Grid::with_spacing(1, 8.0, 0.04, Boundary::Reflecting).unwrap();
    let times: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
    let init = g.gaussian(&[0.0], 1.0).unwrap();
    let flow = ou_flow(g, &init, &times);
    let v = LyapunovSpec::log(1);
    let law = InitialLaw::Gaussian { mean: vec![0.0], var: 1.0 };
    let nu = law.expectation(&|x| v.value(x));
    let dir = dirichlet_integral(&ou(), &v, &flow).unwrap();
    let ens = simulate(&ou(), &law, &cfg(20_000, 1e-3, 1.0, 4, 100), &[]).unwrap();
    for q in [2.0, 4.0] {
        let r = doob_empirical(&ens, &v, q, doob_bound(nu, dir, q)).unwrap();
        assert!(r.pass, "{r:?}");
    }
    assert_eq!(doob_empirical(&ens, &v, 1e6, 0.0).unwrap().statistic, 0.0);

    let still = simulate(&CoefficientField::zero(1), &InitialLaw::Dirac { point: vec![0.0] }, &cfg(1000, 1e-2, 1.0, 1, 10), &[])
        .unwrap();
    let r = doob_empirical(&still, &v, 0.5, doob_bound(0.0, 0.0, 0.5)).unwrap();
    assert!(r.pass && r.statistic == 0.0);
}

#[test]
fn lemma_ek1_cases() {
    let g = Grid::with_spacing(1, 8.0, 0.02, Boundary::Reflecting).unwrap();
    let times: Vec<f64> = (0..=4).map(|k| 0.25 * k as f64).collect();
    let flow = ou_flow(g, &g.gaussian(&[0.0], 1.0).unwrap(), &times);
    let law = InitialLaw::Gaussian { mean: vec![0.0], var: 1.0 };
    let ens = simulate(&ou(), &law, &cfg(20_000, 1e-3, 1.0, 8, 250), &[]).unwrap();
    let bump = Bump::new(vec![0.3], 1.0);
    let f = |x: &[f64]| bump.value(x);
    let one = lemma_ek1_check(&ens, &flow, &f, &GFunctional::Constant { c: 1.0 }, 1.0).unwrap();
    assert!(one.pass && one.statistic.abs() <= 4.0 * one.stderr + 1e-3, "{one:?}");
    let zero = lemma_ek1_check(&ens, &flow, &f, &GFunctional::Constant { c: 0.0 }, 1.0).unwrap();
    assert!(zero.pass && zero.statistic == 0.0);
    let ind = GFunctional::Indicator { at: Observation::HalfS, radius: 1.0 };
    let r = lemma_ek1_check(&ens, &flow, &f, &ind, 1.0).unwrap();
    assert!(r.pass && r.statistic < 0.0, "{r:?}");
    assert!(lemma_ek1_check(&ens, &flow, &f, &GFunctional::Tanh { at: Observation::S, scale: 1.0 }, 1.0).is_err());
}

/// Exact law of the Euler–Maruyama chain for `dX = -X dt + √2 dW`:
/// Gaussian with mean `(1-dt)^k m` and variance `(1-dt)^{2k} v + 2dt Σ_j (1-dt)^{2j}`.
fn em_ou_law(m0: f64, v0: f64, dt: f64, k: usize) -> (f64, f64) {
    let c = 1.0 - dt;
    let mut v = v0;
    for _ in 0..k {
        v = c * c * v + 2.0 * dt;
    }
    (m0 * c.powi(k as i32), v)
}

/// `W₁` between two one-dimensional Gaussians, `∫|F₁ - F₂|` by the midpoint rule.
fn w1_gauss(a: (f64, f64), b: (f64, f64)) -> f64 {
    let cdf = |(m, v): (f64, f64), x: f64| 0.5 * libm::erfc(-(x - m) / (2.0 * v).sqrt());
    let n = 200_000;
    let (lo, hi) = (-12.0, 12.0);
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).map(|x| (cdf(a, x) - cdf(b, x)).abs() * h).sum()
}

#[test]
fn halving_dt_shrinks_the_scheme_bias() {
    let (m0, v0) = (0.5, 0.04);
    let exact = (m0 * (-1.0f64).exp(), 1.0 + (v0 - 1.0) * (-2.0f64).exp());
    let bias = |dt: f64| w1_gauss(em_ou_law(m0, v0, dt, (1.0 / dt).round() as usize), exact);
    let (coarse, fine) = (bias(1e-2), bias(5e-3));
    assert!(coarse / fine >= 1.5, "{coarse} {fine}");

    // the simulated ensemble follows the scheme's own law
    let law = InitialLaw::Gaussian { mean: vec![m0], var: v0 };
    let n = 100_000;
    let ens = simulate(&ou(), &law, &cfg(n, 1e-2, 1.0, 12, 100), &[]).unwrap();
    let xs = ens.first_coordinates(1);
    let (m, v) = em_ou_law(m0, v0, 1e-2, 100);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - m).abs() <= 4.0 * (v / n as f64).sqrt());
    assert!((var - v).abs() <= 4.0 * v * (2.0 / n as f64).sqrt());
}

#[test]
fn ensemble_file_round_trip() {
    let ens = simulate(&ou(), &InitialLaw::Gaussian { mean: vec![0.0, 0.0], var: 1.0 }, &cfg(1000, 1e-2, 0.2, 3, 5), &[])
        .map_err(|e| e.to_string());
    // the ou builtin is one-dimensional
    assert!(ens.is_err());
    let f2 = CoefficientField::isotropic(2, "ou2", 1.0, |_, x: &[f64], b: &mut [f64]| {
        b[0] = -x[0];
        b[1] = -x[1];
    });
    let ens = simulate(&f2, &InitialLaw::Gaussian { mean: vec![0.0, 0.0], var: 1.0 }, &cfg(1000, 1e-2, 0.2, 3, 5), &[]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.bin");
    io::write_ensemble(&p, &ens).unwrap();
    let back = io::read_ensemble(&p).unwrap();
    for i in 0..1000 {
        assert_eq!(back.state(i, 4), ens.state(i, 4));
    }
}
