use std::collections::BTreeMap;
use std::time::Instant;

use fpklab::coeffs::{builtin_field, densities, polar_vortex_integrals, CanonicalBump, ParamValue};
use fpklab::fpk::{analytic_flow, flow_integral, io as flow_io, l1_distance, solve_cauchy_with_stats, weak_residual, AnalyticParams, Grid, MarginalFlow};
use fpklab::lyapunov::{
    apply_l, condition_integral, dirichlet_integral, doob_bound, example21_constant, gronwall_bound, lv_total_bound,
    stationary_band_integral, BoundCertificate, ConditionVariant,
};
use fpklab::mollify::{make_kernel, mollified_coeffs, verify_mollified};
use fpklab::paths::{
    doob_empirical, initial_law_check, lemma_ek1_check, marginal_check, martingale_suite, simulate, suite_verdict, CheckReport,
    GFunctional, InitialLaw, Observation, PathEnsemble, Sided, SimConfig, Tracked,
};
use fpklab::testfn::{builtin_bumps, Bump, SmoothFunction};
use fpklab::{Field, Lyapunov};

use crate::config::{CheckConfig, CheckGroup, InitialConfig, ScenarioConfig};
use crate::report::{AngularRow, CertificateEntry, ConditionEntry, VerificationReport};
use crate::CliError;

/// Which parts of a scenario a run executes.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    /// `None` admits every check.
    pub groups: Option<Vec<CheckGroup>>,
    pub conditions: bool,
    pub force_flow: bool,
    pub force_ensemble: bool,
}

impl Filter {
    pub fn all() -> Self {
        Self { groups: None, conditions: true, force_flow: false, force_ensemble: false }
    }

    pub fn only(groups: &[CheckGroup]) -> Self {
        Self { groups: Some(groups.to_vec()), conditions: false, force_flow: false, force_ensemble: false }
    }

    pub fn admits(&self, c: &CheckConfig) -> bool {
        self.groups.as_ref().is_none_or(|g| g.contains(&c.group()))
    }
}

/// A report together with the artifacts it was computed from.
#[derive(Debug)]
pub struct Outcome {
    pub report: VerificationReport,
    pub flow: Option<MarginalFlow>,
    pub ensemble: Option<PathEnsemble>,
}

/// Runs every check of the scenario and the condition integrals.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<VerificationReport, CliError> {
    run_scenario_with(cfg, &Filter::all()).map(|o| o.report)
}

/// Radii of the sample set used to certify `LV ≤ C + CV`.
fn certification_radii() -> Vec<f64> {
    std::iter::once(0.0).chain((0..20).map(|k| 0.1 * 1.6f64.powi(k))).collect()
}

fn number(cfg: &ScenarioConfig, key: &str, default: f64) -> f64 {
    match cfg.field.params.get(key) {
        Some(ParamValue::Number(v)) => *v,
        _ => default,
    }
}

fn resolve_grid(cfg: &ScenarioConfig) -> Result<(Grid, Option<Vec<f64>>), CliError> {
    if let InitialConfig::GridFile { path } = &cfg.initial {
        let f = flow_io::read_flow(path)?;
        let g = *f.grid();
        if cfg.grid.is_some() && cfg.grid()? != g {
            return Err(CliError::ConfigInvalid(format!("grid of {} differs from the configured grid", path.display())));
        }
        return Ok((g, Some(f.density(0).to_vec())));
    }
    Ok((cfg.grid()?, None))
}

fn initial_law(cfg: &ScenarioConfig, initial: &InitialConfig) -> Result<InitialLaw, CliError> {
    Ok(match initial {
        InitialConfig::Gaussian { mean, var } => InitialLaw::Gaussian { mean: mean.clone(), var: *var },
        InitialConfig::Delta { point } => InitialLaw::Dirac { point: point.clone() },
        InitialConfig::GridFile { .. } => {
            let (grid, density) = resolve_grid(cfg)?;
            InitialLaw::GridDensity { grid, density: density.expect("grid file") }
        }
    })
}

fn initial_density(cfg: &ScenarioConfig, grid: &Grid, file: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    Ok(match (&cfg.initial, file) {
        (_, Some(d)) => d,
        (InitialConfig::Gaussian { mean, var }, None) => grid.gaussian(mean, *var)?,
        (InitialConfig::Delta { point }, None) => grid.delta(point)?,
        (InitialConfig::GridFile { .. }, None) => unreachable!("grid files resolve to a density"),
    })
}

fn lyapunov_of(cfg: &ScenarioConfig, dim: usize) -> Result<Lyapunov, CliError> {
    match &cfg.lyapunov {
        Some(l) => Ok(Lyapunov::by_name(&l.family, dim, l.power)?),
        None => Ok(Lyapunov::log(dim)),
    }
}

fn bumps_inside(grid: &Grid) -> Result<Vec<Bump<f64>>, CliError> {
    let v: Vec<Bump<f64>> = builtin_bumps(grid.dim)
        .into_iter()
        .filter(|b| b.support().is_some_and(|(c, r)| grid.contains_ball(&c, r, 2.0)))
        .collect();
    if v.is_empty() {
        return Err(CliError::ConfigInvalid("no builtin test function fits inside the grid".into()));
    }
    Ok(v)
}

fn as_dyn(b: &[Bump<f64>]) -> Vec<&dyn SmoothFunction<f64>> {
    b.iter().map(|b| b as &dyn SmoothFunction<f64>).collect()
}

fn need<'a, T>(x: &'a Option<T>, what: &str) -> Result<&'a T, CliError> {
    x.as_ref().ok_or_else(|| CliError::ConfigInvalid(format!("{what} is not available in this run")))
}

/// Default functionals of the martingale suite.
fn default_functionals() -> Vec<GFunctional> {
    vec![
        GFunctional::Constant { c: 1.0 },
        GFunctional::Indicator { at: Observation::HalfS, radius: 1.0 },
        GFunctional::Cos { at: Observation::S, freq: 1.0 },
    ]
}

fn time_label(t: f64) -> String {
    format!("t={t}")
}

pub fn run_scenario_with(cfg: &ScenarioConfig, filter: &Filter) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut runtimes = BTreeMap::new();
    let field: Field = builtin_field(&cfg.field.name, &cfg.field.params)?;
    let d = field.dim();
    let checks: Vec<&CheckConfig> = cfg.checks.iter().filter(|c| filter.admits(c)).collect();
    let want_conditions = filter.conditions && !cfg.conditions.is_empty();
    let need_flow = filter.force_flow || want_conditions || checks.iter().any(|c| c.needs_flow());
    let need_ensemble = filter.force_ensemble || checks.iter().any(|c| c.needs_ensemble());
    let mut report = VerificationReport::new(cfg.clone(), cfg.ensemble.map(|e| e.seed));

    let flow = if need_flow {
        let t0 = Instant::now();
        let (grid, file) = resolve_grid(cfg)?;
        let init = initial_density(cfg, &grid, file)?;
        let (flow, stats) = solve_cauchy_with_stats(&field, &init, &grid, &cfg.flow_times(), cfg.solver.cfl_safety)?;
        let defect = (0..flow.len()).map(|k| flow.accounting_defect(k).abs()).fold(0.0, f64::max);
        report.diagnostics.insert("flow.max_accounting_defect".into(), defect);
        report.diagnostics.insert("flow.final_leak".into(), *flow.leak().last().expect("nodes"));
        report.diagnostics.insert("flow.final_floored".into(), *flow.floored().last().expect("nodes"));
        report.diagnostics.insert("flow.steps".into(), stats.steps as f64);
        report.diagnostics.insert("flow.dt_min".into(), stats.dt_min);
        runtimes.insert("solve".to_string(), t0.elapsed().as_secs_f64());
        Some(flow)
    } else {
        None
    };

    let track_bumps = checks.iter().any(|c| matches!(c, CheckConfig::Martingale { .. }));
    let ensemble_bumps = builtin_bumps(d);
    let ensemble = if need_ensemble {
        let t0 = Instant::now();
        let e = need(&cfg.ensemble, "the ensemble section")?;
        let law = initial_law(cfg, &cfg.initial)?;
        let sim = SimConfig { n_paths: e.n_paths, dt: e.dt, horizon: cfg.horizon, seed: e.seed, record_stride: cfg.record_stride()? };
        let tracked: Vec<Tracked> =
            if track_bumps { ensemble_bumps.iter().map(|b| Tracked::new(b as &dyn SmoothFunction<f64>)).collect() } else { Vec::new() };
        let ens = simulate(&field, &law, &sim, &tracked)?;
        report.diagnostics.insert("ensemble.n_blown".into(), ens.n_blown() as f64);
        report.diagnostics.insert("ensemble.max_clip".into(), ens.max_clip());
        if ens.n_blown() > 0 {
            report.notes.push(format!("{} of {} paths left the finite range and are excluded", ens.n_blown(), ens.n_paths()));
        }
        runtimes.insert("simulate".to_string(), t0.elapsed().as_secs_f64());
        Some(ens)
    } else {
        None
    };

    let mut martingale_suites = 0;
    for check in checks {
        let t0 = Instant::now();
        match check {
            CheckConfig::Oracle { oracle, times, tol } => {
                let flow = need(&flow, "the flow")?;
                let name = match (oracle.as_deref(), cfg.field.name.as_str()) {
                    (Some(o), _) => o.to_string(),
                    (None, "heat") => "heat-gaussian".into(),
                    (None, "ou") => "ou-gaussian".into(),
                    (None, other) => return Err(CliError::ConfigInvalid(format!("no closed-form oracle for '{other}'"))),
                };
                let (m0, v0) = match &cfg.initial {
                    InitialConfig::Gaussian { mean, var } if mean.iter().all(|m| *m == mean[0]) => (mean[0], *var),
                    _ => return Err(CliError::ConfigInvalid("oracles need a Gaussian initial law with equal mean coordinates".into())),
                };
                let p = AnalyticParams { a: number(cfg, "a", 1.0), theta: number(cfg, "theta", 1.0), m0, v0 };
                let exact = analytic_flow(&name, &p, flow.grid(), times)?;
                for (k, &t) in times.iter().enumerate() {
                    let err = l1_distance(flow.grid(), &flow.density_at(t)?, exact.density(k));
                    report.push(CheckReport::new(format!("oracle-l1[{name}; {}]", time_label(t)), err, 0.0, *tol, Sided::OneSided, 0));
                }
            }
            CheckConfig::WeakResidual { tol } => {
                let flow = need(&flow, "the flow")?;
                let bumps = bumps_inside(flow.grid())?;
                let w = weak_residual(flow, &field, &as_dyn(&bumps))?;
                report.push(CheckReport::new("weak-residual", w.max_abs, 0.0, *tol, Sided::OneSided, bumps.len()));
            }
            CheckConfig::InitialLaw { reference } => {
                let ens = need(&ensemble, "the ensemble")?;
                let law = initial_law(cfg, reference.as_ref().unwrap_or(&cfg.initial))?;
                let mut r = initial_law_check(ens, &law)?;
                if reference.is_some() {
                    r.name = format!("{} vs reference", r.name);
                }
                report.push(r);
            }
            CheckConfig::Marginal { times, tol } => {
                let (ens, flow) = (need(&ensemble, "the ensemble")?, need(&flow, "the flow")?);
                for r in marginal_check(ens, flow, times, *tol)? {
                    if let Some(t) = r.name.strip_prefix("marginal-w1[t=").and_then(|s| s.strip_suffix(']')) {
                        report.series.w1.push((t.parse().expect("formatted time"), r.statistic));
                    }
                    report.push(r);
                }
            }
            CheckConfig::Martingale { windows, functionals } => {
                let ens = need(&ensemble, "the ensemble")?;
                let gs = functionals.clone().unwrap_or_else(default_functionals);
                for g in &gs {
                    g.validate()?;
                }
                let members = martingale_suite(ens, &field, &as_dyn(&ensemble_bumps), &gs, windows)?;
                let name = if martingale_suites == 0 { "martingale-suite".to_string() } else { format!("martingale-suite#{martingale_suites}") };
                martingale_suites += 1;
                report.push_suite(&name, suite_verdict(&members), members);
            }
            CheckConfig::Doob {} => {
                let (ens, flow) = (need(&ensemble, "the ensemble")?, need(&flow, "the flow")?);
                let l = need(&cfg.lyapunov, "the lyapunov section")?;
                let v = lyapunov_of(cfg, d)?;
                let nu = flow.expectation(0, |x| v.value(x));
                let dir = dirichlet_integral(&field, &v, flow)?;
                report.diagnostics.insert("doob.nu_integral".into(), nu);
                report.diagnostics.insert("doob.dirichlet_integral".into(), dir);
                for &q in &l.q {
                    report.push(doob_empirical(ens, &v, q, doob_bound(nu, dir, q))?);
                }
            }
            CheckConfig::Ek1 { t } => {
                let (ens, flow) = (need(&ensemble, "the ensemble")?, need(&flow, "the flow")?);
                let bumps = bumps_inside(flow.grid())?;
                let gs: Vec<GFunctional> = GFunctional::registry().into_iter().filter(|g| g.range().0 >= 0.0).collect();
                for b in &bumps {
                    for g in &gs {
                        let mut r = lemma_ek1_check(ens, flow, &|x| b.value(x), g, *t)?;
                        r.name = format!("ek1[{}; {}; {}]", b.label(), g.label(), time_label(*t));
                        report.push(r);
                    }
                }
            }
            CheckConfig::LyapunovBounds { slack } => lyapunov_bounds(cfg, &field, need(&flow, "the flow")?, *slack, &mut report)?,
            CheckConfig::Mollify { tol } => mollify_checks(cfg, &field, need(&flow, "the flow")?, *tol, &mut report)?,
            CheckConfig::ConditionSeparation { radii, horizon, min_last_increment, cauchy_tol } => {
                condition_separation(cfg, &field, radii, *horizon, *min_last_increment, *cauchy_tol, &mut report)?
            }
            CheckConfig::Example32 { n_max, ratio_min, tail_tol, quad_step } => {
                example32(*n_max, *ratio_min, *tail_tol, *quad_step, &mut report)?
            }
        }
        *runtimes.entry(format!("check.{}", check.kind())).or_insert(0.0) += t0.elapsed().as_secs_f64();
    }

    if want_conditions {
        let t0 = Instant::now();
        let flow = need(&flow, "the flow")?;
        let profile = lyapunov_of(cfg, d)?;
        for name in &cfg.conditions {
            let entry = ConditionVariant::by_name(name, Some(profile.clone()))
                .and_then(|v| condition_integral(&field, flow, &v))
                .map_or_else(
                    |e| ConditionEntry { variant: name.clone(), value: None, error: Some(e.to_string()) },
                    |v| ConditionEntry { variant: name.clone(), value: Some(v), error: None },
                );
            report.conditions.push(entry);
        }
        runtimes.insert("conditions".to_string(), t0.elapsed().as_secs_f64());
    }

    runtimes.insert("total".to_string(), started.elapsed().as_secs_f64());
    report.runtimes = Some(runtimes);
    report.finalize();
    Ok(Outcome { report, flow, ensemble })
}

/// `∫V dμ_t` against the Gronwall bound at every output time after 0, and
/// `∫₀^T∫|LV| dμ dt` against its bound, with `W ≡ C`.
fn lyapunov_bounds(cfg: &ScenarioConfig, field: &Field, flow: &MarginalFlow, slack: f64, report: &mut VerificationReport) -> Result<(), CliError> {
    let v = lyapunov_of(cfg, field.dim())?;
    let supplied = cfg.lyapunov.as_ref().and_then(|l| l.c);
    let t_samples: Vec<f64> = if field.is_autonomous() { vec![0.0] } else { flow.times().to_vec() };
    let c = match supplied {
        Some(c) => {
            report.notes.push(format!("growth constant C = {c} was supplied and is not certified"));
            c
        }
        None => match example21_constant(field, &v, &certification_radii(), &t_samples, 8)? {
            Some(c) => c,
            None => {
                report.push(CheckReport::new("lyapunov-ladder", f64::INFINITY, 0.0, 0.0, Sided::OneSided, 0));
                return Ok(());
            }
        },
    };
    report.diagnostics.insert("lyapunov.growth_c".into(), c);
    let nu = flow.expectation(0, |x| v.value(x));
    // ∫₀^t ∫W dμ_s ds with W ≡ C, by the trapezoid rule on the flow nodes
    let mut w_int = vec![0.0; flow.len()];
    for k in 1..flow.len() {
        let dt = flow.times()[k] - flow.times()[k - 1];
        w_int[k] = w_int[k - 1] + 0.5 * dt * c * (flow.mass(k) + flow.mass(k - 1));
    }
    let ratio_tol = 1.0 - slack;
    for k in 1..flow.len() {
        let t = flow.times()[k];
        let value = flow.expectation(k, |x| v.value(x));
        let bound = gronwall_bound(nu, w_int[k], c, t);
        report.push(CheckReport::new(format!("gronwall[{}; {}]", v.label(), time_label(t)), value / bound, 0.0, ratio_tol, Sided::OneSided, 0));
    }
    let tau = flow.horizon();
    let lv = flow_integral(flow, |t, x| apply_l(field, &v, t, x).map_or(f64::NAN, f64::abs))?;
    let w_total = *w_int.last().expect("nodes");
    let bound = lv_total_bound(nu, w_total, c, tau);
    report.push(CheckReport::new(format!("lv-total[{}]", v.label()), lv / bound, 0.0, ratio_tol, Sided::OneSided, 0));
    report.certificates.push(CertificateEntry { name: v.label(), certificate: BoundCertificate::new(nu, w_total, c, tau) });
    Ok(())
}

fn mollify_checks(cfg: &ScenarioConfig, field: &Field, flow: &MarginalFlow, tol: f64, report: &mut VerificationReport) -> Result<(), CliError> {
    let m = need(&cfg.mollify, "the mollify section")?;
    let horizon = cfg.mollify_horizon().expect("validated");
    let bumps = bumps_inside(flow.grid())?;
    let tests = as_dyn(&bumps);
    let mut distances = Vec::new();
    for &eps in &m.epsilons {
        let sys = mollified_coeffs(field, flow, m.delta, make_kernel(eps, field.dim())?, horizon)?;
        let r = verify_mollified(&sys, &tests, m.time_step)?;
        let n = r.residuals.len();
        report.push(CheckReport::new(format!("mollify-residual[eps={eps}]"), r.max_residual, 0.0, tol, Sided::OneSided, n));
        report.push(CheckReport::new(format!("mollify-psd[eps={eps}]"), r.min_script_a_eig, 0.0, -1e-12, Sided::AtLeast, n));
        report.push(CheckReport::new(format!("mollify-floor[eps={eps}]"), r.min_floor_ratio, 0.0, 1.0 - 1e-12, Sided::AtLeast, n));
        report.diagnostics.insert(format!("mollify.normalization_defect[eps={eps}]"), r.max_normalization_defect);
        report.series.weak_distance.push((eps, r.bump_distance));
        distances.push((eps, r.bump_distance));
    }
    distances.sort_by(|a, b| b.0.total_cmp(&a.0));
    if distances.len() >= 2 {
        let worst = distances.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
        let mut r = CheckReport::new("mollify-distance-decreasing", worst, 0.0, 0.0, Sided::OneSided, distances.len());
        r.pass = worst < 0.0;
        report.push(r);
    }
    Ok(())
}

fn stationary_density(cfg: &ScenarioConfig, field: &Field) -> Result<Box<dyn Fn(f64) -> f64>, CliError> {
    if field.dim() != 1 {
        return Err(CliError::ConfigInvalid("condition separation is one-dimensional".into()));
    }
    match cfg.field.name.as_str() {
        "oscillatory-1d" => Ok(Box::new(densities::oscillatory)),
        "ou" => {
            let var = number(cfg, "a", 1.0) / number(cfg, "theta", 1.0);
            Ok(Box::new(move |x| (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()))
        }
        other => Err(CliError::ConfigInvalid(format!("no stationary density known for '{other}'"))),
    }
}

fn condition_separation(
    cfg: &ScenarioConfig,
    field: &Field,
    radii: &[f64],
    horizon: f64,
    min_last_increment: f64,
    cauchy_tol: f64,
    report: &mut VerificationReport,
) -> Result<(), CliError> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(CliError::ConfigInvalid("separation radii must be positive and increasing, at least two".into()));
    }
    let rho = stationary_density(cfg, field)?;
    let mut tr = Vec::with_capacity(radii.len());
    let mut nw = Vec::with_capacity(radii.len());
    for &r in radii {
        tr.push(stationary_band_integral(field, &*rho, &ConditionVariant::Trevisan, r, horizon)?.value);
        nw.push(stationary_band_integral(field, &*rho, &ConditionVariant::New, r, horizon)?.value);
        report.series.condition_bands.push((r, *tr.last().expect("pushed"), *nw.last().expect("pushed")));
    }
    let inc = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let (ti, ni) = (inc(&tr), inc(&nw));
    let min_inc = ti.iter().copied().fold(f64::INFINITY, f64::min);
    let mut r = CheckReport::new("separation-trevisan-min-increment", min_inc, 0.0, 0.0, Sided::AtLeast, radii.len());
    r.pass = min_inc > 0.0;
    report.push(r);
    let last = *ti.last().expect("two radii");
    report.push(CheckReport::new("separation-trevisan-last-increment", last, 0.0, min_last_increment, Sided::AtLeast, radii.len()));
    let last = *ni.last().expect("two radii");
    report.push(CheckReport::new("separation-new-last-increment", last, 0.0, cauchy_tol, Sided::TwoSided, radii.len()));
    Ok(())
}

fn example32(n_max: u32, ratio_min: f64, tail_tol: f64, quad_step: f64, report: &mut VerificationReport) -> Result<(), CliError> {
    let p = polar_vortex_integrals(n_max, &CanonicalBump, quad_step)?;
    let n = p.angular_partials.len();
    let min_ratio_to = |b: &[f64]| p.angular_partials.iter().zip(b).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
    report.push(CheckReport::new("example32-partials-over-lower-bound", min_ratio_to(&p.lower_bounds), 0.0, 1.0, Sided::AtLeast, n));
    report.push(CheckReport::new("example32-partials-over-certified-floor", min_ratio_to(&p.certified_floor), 0.0, 1.0, Sided::AtLeast, n));
    let ratio = p.angular_ratios().into_iter().fold(f64::INFINITY, f64::min);
    report.push(CheckReport::new("example32-min-successive-ratio", ratio, 0.0, ratio_min, Sided::AtLeast, n));
    let tail = *p.radial_terms.last().expect("n_max >= 1");
    report.push(CheckReport::new("example32-radial-tail-increment", tail, 0.0, tail_tol, Sided::OneSided, n));
    report.diagnostics.insert("example32.c_psi".into(), p.c_psi);
    report.diagnostics.insert("example32.radial_integral".into(), p.radial_integral);
    for k in 0..n {
        report.series.angular.push(AngularRow {
            k: k as u32 + 1,
            partial: p.angular_partials[k],
            lower_bound: p.lower_bounds[k],
            certified_floor: p.certified_floor[k],
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{"schema_version": 1, "field": {{"name": "heat"}}, "initial": {{"kind": "gaussian", "mean": [0.0], "var": 0.25}},
                "grid": {{"r_dom": 8.0, "cells": 400, "boundary": "reflecting"}}, "horizon": 0.2 {extra}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn empty_checks_give_condition_integrals_only() {
        let r = run_scenario(&cfg("")).unwrap();
        assert!(r.checks.is_empty() && r.all_passed);
        let names: Vec<&str> = r.conditions.iter().map(|c| c.variant.as_str()).collect();
        assert_eq!(names, ["trevisan", "new", "generalized"]);
        assert!(r.conditions.iter().all(|c| c.value.is_some()));
    }

    #[test]
    fn filter_skips_other_groups() {
        let c = cfg(r#", "conditions": [], "checks": [{"kind": "weak-residual", "tol": 1e-2}, {"kind": "example32", "n_max": 4}]"#);
        let o = run_scenario_with(&c, &Filter::only(&[CheckGroup::Example32])).unwrap();
        assert!(o.flow.is_none());
        assert!(o.report.checks.iter().all(|c| c.name.starts_with("example32")));
        assert_eq!(o.report.series.angular.len(), 4);
    }
}
