use std::path::{Path, PathBuf};

use fpklab::coeffs::{builtin_field, builtin_names, Params};
use fpklab::fpk::{Boundary, Grid};
use fpklab::paths::GFunctional;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// A scenario: one field, one initial law, and the checks to run on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub field: FieldConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub horizon: f64,
    /// Flow output times; defaults to multiples of `output_step` up to the horizon.
    #[serde(default)]
    pub output_times: Option<Vec<f64>>,
    #[serde(default = "default_output_step")]
    pub output_step: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    /// Condition variants integrated over the flow (`trevisan`, `new`, `generalized`).
    #[serde(default = "default_conditions")]
    pub conditions: Vec<String>,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    #[serde(default)]
    pub mollify: Option<MollifyConfig>,
    #[serde(default)]
    pub lyapunov: Option<LyapunovConfig>,
}

fn default_output_step() -> f64 {
    0.05
}

fn default_conditions() -> Vec<String> {
    vec!["trevisan".into(), "new".into(), "generalized".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian { mean: Vec<f64>, var: f64 },
    Delta { point: Vec<f64> },
    /// A flow directory written by `solve-fpk`; its first node is used.
    GridFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width `R` of `[-R, R]^d`.
    pub r_dom: f64,
    /// Cells per axis.
    pub cells: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub cfl_safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { cfl_safety: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Steps between stored states; by default the coarsest stride that hits
    /// every time the checks read.
    #[serde(default)]
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyConfig {
    pub epsilons: Vec<f64>,
    pub delta: f64,
    #[serde(default = "default_mollify_step")]
    pub time_step: f64,
    /// Defaults to the longest horizon the flow supports, `T - δ - √2 max ε`.
    #[serde(default)]
    pub horizon: Option<f64>,
}

fn default_mollify_step() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    /// `log`, `loglog` or `power`.
    pub family: String,
    #[serde(default)]
    pub power: Option<f64>,
    /// Levels for the Doob check.
    #[serde(default)]
    pub q: Vec<f64>,
    /// Growth constant `C` with `W ≡ C` in `LV ≤ W + CV`; by default the
    /// smallest ladder value that holds on the sample set.
    #[serde(default)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckConfig {
    /// `L¹` distance to a closed-form flow.
    Oracle {
        #[serde(default)]
        oracle: Option<String>,
        times: Vec<f64>,
        tol: f64,
    },
    /// Weak formulation against the builtin bumps.
    WeakResidual { tol: f64 },
    /// Kolmogorov–Smirnov (one dimension) or bump z-scores against
    /// `reference`, by default the scenario's own initial law.
    InitialLaw {
        #[serde(default)]
        reference: Option<InitialConfig>,
    },
    Marginal { times: Vec<f64>, tol: f64 },
    Martingale {
        windows: Vec<(f64, f64)>,
        #[serde(default)]
        functionals: Option<Vec<GFunctional>>,
    },
    Doob {},
    Ek1 { t: f64 },
    LyapunovBounds { slack: f64 },
    Mollify { tol: f64 },
    ConditionSeparation {
        radii: Vec<f64>,
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default = "default_last_increment")]
        min_last_increment: f64,
        #[serde(default = "default_cauchy")]
        cauchy_tol: f64,
    },
    Example32 {
        #[serde(default = "default_n_max")]
        n_max: u32,
        #[serde(default = "default_ratio")]
        ratio_min: f64,
        #[serde(default = "default_tail")]
        tail_tol: f64,
        #[serde(default = "default_quad_step")]
        quad_step: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn default_last_increment() -> f64 {
    0.05
}
fn default_cauchy() -> f64 {
    1e-2
}
fn default_n_max() -> u32 {
    12
}
fn default_ratio() -> f64 {
    1.8
}
fn default_tail() -> f64 {
    1e-3
}
fn default_quad_step() -> f64 {
    1e-3
}

/// Coarse grouping of checks, used by the subcommand filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckGroup {
    Flow,
    Paths,
    Lyapunov,
    Mollify,
    Condition,
    Example32,
}

impl CheckConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Oracle { .. } => "oracle",
            Self::WeakResidual { .. } => "weak-residual",
            Self::InitialLaw { .. } => "initial-law",
            Self::Marginal { .. } => "marginal",
            Self::Martingale { .. } => "martingale",
            Self::Doob {} => "doob",
            Self::Ek1 { .. } => "ek1",
            Self::LyapunovBounds { .. } => "lyapunov-bounds",
            Self::Mollify { .. } => "mollify",
            Self::ConditionSeparation { .. } => "condition-separation",
            Self::Example32 { .. } => "example32",
        }
    }

    pub fn group(&self) -> CheckGroup {
        match self {
            Self::Oracle { .. } | Self::WeakResidual { .. } => CheckGroup::Flow,
            Self::InitialLaw { .. } | Self::Marginal { .. } | Self::Martingale { .. } | Self::Ek1 { .. } => CheckGroup::Paths,
            Self::Doob {} | Self::LyapunovBounds { .. } => CheckGroup::Lyapunov,
            Self::Mollify { .. } => CheckGroup::Mollify,
            Self::ConditionSeparation { .. } => CheckGroup::Condition,
            Self::Example32 { .. } => CheckGroup::Example32,
        }
    }

    pub fn needs_flow(&self) -> bool {
        !matches!(self, Self::ConditionSeparation { .. } | Self::Example32 { .. } | Self::InitialLaw { .. } | Self::Martingale { .. })
    }

    pub fn needs_ensemble(&self) -> bool {
        matches!(self, Self::InitialLaw { .. } | Self::Marginal { .. } | Self::Martingale { .. } | Self::Doob {} | Self::Ek1 { .. })
    }

    /// Times at which the check reads ensemble states.
    fn ensemble_times(&self, horizon: f64) -> Vec<f64> {
        match self {
            Self::Marginal { times, .. } => times.clone(),
            Self::Martingale { windows, .. } => windows.iter().flat_map(|&(s, t)| [s, 0.5 * s, t]).collect(),
            Self::Ek1 { t } => vec![*t, 0.5 * t],
            _ => vec![0.0, horizon],
        }
    }

    fn tolerances(&self) -> Vec<f64> {
        match self {
            Self::Oracle { tol, .. } | Self::WeakResidual { tol } | Self::Marginal { tol, .. } | Self::Mollify { tol } => vec![*tol],
            Self::LyapunovBounds { slack } => vec![*slack],
            Self::ConditionSeparation { min_last_increment, cauchy_tol, .. } => vec![*min_last_increment, *cauchy_tol],
            Self::Example32 { ratio_min, tail_tol, quad_step, .. } => vec![*ratio_min, *tail_tol, *quad_step],
            _ => Vec::new(),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        let f = builtin_field::<f64>(&self.field.name, &self.field.params).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        Ok(f.dim())
    }

    pub fn needs_flow(&self) -> bool {
        !self.conditions.is_empty() || self.checks.iter().any(CheckConfig::needs_flow)
    }

    pub fn needs_ensemble(&self) -> bool {
        self.checks.iter().any(CheckConfig::needs_ensemble)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = self.grid.ok_or_else(|| CliError::ConfigInvalid("a grid is required for flow checks".into()))?;
        Grid::new(self.dim()?, g.r_dom, g.cells, g.boundary).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    /// Sorted flow output times including 0, the horizon and every time a check reads.
    pub fn flow_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = match &self.output_times {
            Some(v) => v.clone(),
            None => {
                let n = (self.horizon / self.output_step).round().max(1.0) as usize;
                (0..=n).map(|k| ((k as f64 * self.output_step * 1e12).round() / 1e12).min(self.horizon)).collect()
            }
        };
        t.push(0.0);
        t.push(self.horizon);
        for c in &self.checks {
            match c {
                CheckConfig::Oracle { times, .. } | CheckConfig::Marginal { times, .. } => t.extend(times),
                CheckConfig::Ek1 { t: s } => t.push(*s),
                _ => {}
            }
        }
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        t
    }

    /// Explicit stride, or the gcd of the step indices of every time a check reads.
    pub fn record_stride(&self) -> Result<usize, CliError> {
        let e = self.ensemble.ok_or_else(|| CliError::ConfigInvalid("checks need an ensemble section".into()))?;
        if let Some(s) = e.record_stride {
            return Ok(s);
        }
        let mut g = 0;
        for c in &self.checks {
            for t in c.ensemble_times(self.horizon) {
                let k = (t / e.dt).round();
                if (k * e.dt - t).abs() > 1e-9 * (1.0 + t) {
                    return Err(CliError::ConfigInvalid(format!("check time {t} is not a multiple of dt = {}", e.dt)));
                }
                g = gcd(g, k as usize);
            }
        }
        let n = (self.horizon / e.dt).round() as usize;
        Ok(gcd(g, n).max(1))
    }

    pub fn mollify_horizon(&self) -> Option<f64> {
        let m = self.mollify.as_ref()?;
        let e = m.epsilons.iter().copied().fold(0.0, f64::max);
        let room = self.horizon - m.delta - std::f64::consts::SQRT_2 * e;
        match m.horizon {
            Some(h) if h <= room + 1e-12 => Some(h),
            Some(_) => None,
            None => Some(room),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::ConfigInvalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if !builtin_names().contains(&self.field.name.as_str()) {
            return bad(format!("unknown builtin field '{}'", self.field.name));
        }
        let d = self.dim()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.output_step > 0.0) {
            return bad("output_step must be positive".into());
        }
        match &self.initial {
            InitialConfig::Gaussian { mean, var } if mean.len() != d || !(*var > 0.0) => {
                return bad(format!("gaussian initial law needs a {d}-dimensional mean and var > 0"))
            }
            InitialConfig::Delta { point } if point.len() != d => return bad(format!("delta needs a {d}-dimensional point")),
            _ => {}
        }
        if !(self.solver.cfl_safety > 0.0 && self.solver.cfl_safety <= 1.0) {
            return bad("solver.cfl_safety must lie in (0, 1]".into());
        }
        if self.needs_flow() && !matches!(self.initial, InitialConfig::GridFile { .. }) {
            self.grid()?;
        }
        if let Some(e) = &self.ensemble {
            if !(e.dt > 0.0 && e.dt <= self.horizon) {
                return bad(format!("ensemble.dt = {} must lie in (0, T]", e.dt));
            }
        }
        if self.needs_ensemble() {
            self.record_stride()?;
        }
        for c in &self.conditions {
            if !["trevisan", "new", "generalized"].contains(&c.as_str()) {
                return bad(format!("unknown condition variant '{c}'"));
            }
        }
        for c in &self.checks {
            if c.tolerances().iter().any(|t| !(*t > 0.0)) {
                return bad(format!("check '{}' needs positive tolerances", c.kind()));
            }
            match c {
                CheckConfig::Mollify { .. } if self.mollify.is_none() => return bad("mollify check needs a mollify section".into()),
                CheckConfig::Doob {} | CheckConfig::LyapunovBounds { .. } if self.lyapunov.is_none() => {
                    return bad(format!("check '{}' needs a lyapunov section", c.kind()))
                }
                CheckConfig::Doob {} if self.lyapunov.as_ref().is_some_and(|l| l.q.iter().any(|q| !(*q > 0.0))) => {
                    return bad("Doob levels must be positive".into())
                }
                _ => {}
            }
        }
        if let Some(m) = &self.mollify {
            if m.epsilons.is_empty() || m.epsilons.iter().any(|e| !(*e > 0.0)) || !(m.delta > 0.0) || !(m.time_step > 0.0) {
                return bad("mollify needs positive epsilons, delta and time_step".into());
            }
            if !(self.mollify_horizon().is_some_and(|h| h > 0.0)) {
                return bad("mollify horizon must be positive and leave room for the shift and the kernel".into());
            }
        }
        if let Some(l) = &self.lyapunov {
            fpklab::Lyapunov::by_name(&l.family, d, l.power).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
            if l.c.is_some_and(|c| !(c >= 0.0)) {
                return bad("lyapunov.c must be nonnegative".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{"schema_version": 1, "field": {"name": "ou"}, "initial": {"kind": "gaussian", "mean": [0.0], "var": 1.0},
            "grid": {"r_dom": 8.0, "cells": 400, "boundary": "reflecting"}, "horizon": 1.0}"#
            .into()
    }

    #[test]
    fn minimal_config_parses() {
        let c = ScenarioConfig::from_json(&minimal()).unwrap();
        assert_eq!(c.conditions.len(), 3);
        assert_eq!(c.flow_times().len(), 21);
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        let text = minimal().replace("\"ou\"", "\"nope\"");
        assert!(matches!(ScenarioConfig::from_json(&text), Err(CliError::ConfigInvalid(_))));
        let text = minimal().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn stride_hits_every_check_time() {
        let mut c = ScenarioConfig::from_json(&minimal()).unwrap();
        c.ensemble = Some(EnsembleConfig { n_paths: 1000, dt: 1e-3, seed: 1, record_stride: None });
        c.checks = vec![CheckConfig::Martingale { windows: vec![(0.0, 0.5), (0.25, 1.0)], functionals: None }];
        assert_eq!(c.record_stride().unwrap(), 125);
    }
}
