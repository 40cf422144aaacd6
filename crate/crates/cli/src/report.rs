use std::collections::BTreeMap;

use fpklab::lyapunov::{BoundCertificate, ConditionValue};
use fpklab::paths::{CheckReport, SuiteVerdict};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Everything one scenario run established.
///
/// The echoed scenario carries the effective seed, so the report can be
/// re-run as is. `runtimes` is never part of the canonical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub seed: Option<u64>,
    pub versions: BTreeMap<String, String>,
    /// Individual checks and one summary line per suite.
    pub checks: Vec<CheckReport>,
    pub suites: Vec<SuiteReport>,
    pub conditions: Vec<ConditionEntry>,
    pub certificates: Vec<CertificateEntry>,
    pub series: Series,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub all_passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtimes: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub verdict: SuiteVerdict,
    pub members: Vec<CheckReport>,
}

/// A condition integral, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub variant: String,
    pub value: Option<ConditionValue>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub name: String,
    pub certificate: BoundCertificate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// `(t, W₁)` of the empirical marginal against the flow.
    pub w1: Vec<(f64, f64)>,
    /// `(ε, bump distance to the shifted flow)`.
    pub weak_distance: Vec<(f64, f64)>,
    pub angular: Vec<AngularRow>,
    /// `(R, trevisan, new)` band integrals.
    pub condition_bands: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularRow {
    pub k: u32,
    pub partial: f64,
    pub lower_bound: f64,
    pub certified_floor: f64,
}

fn finite_or_max(v: &mut f64) -> bool {
    if v.is_finite() {
        return false;
    }
    *v = if *v == f64::NEG_INFINITY { f64::MIN } else { f64::MAX };
    true
}

impl VerificationReport {
    pub fn new(scenario: ScenarioConfig, seed: Option<u64>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("fpklab-cli".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("report-schema".into(), REPORT_SCHEMA_VERSION.to_string());
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario,
            seed,
            versions,
            checks: Vec::new(),
            suites: Vec::new(),
            conditions: Vec::new(),
            certificates: Vec::new(),
            series: Series::default(),
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
            all_passed: true,
            runtimes: None,
        }
    }

    pub fn push(&mut self, check: CheckReport) {
        self.checks.push(check);
    }

    /// Records a suite and two summary checks: the failing fraction and the median z-score.
    pub fn push_suite(&mut self, name: &str, verdict: SuiteVerdict, members: Vec<CheckReport>) {
        use fpklab::paths::Sided;
        let fail = 1.0 - verdict.pass_fraction;
        let mut a = CheckReport::new(format!("{name}: failing fraction"), fail, 0.0, 0.1, Sided::OneSided, verdict.n_checks);
        a.pass = verdict.pass_fraction >= 0.9;
        self.checks.push(a);
        self.checks.push(CheckReport::new(format!("{name}: median z"), verdict.median_z, 0.0, 2.0, Sided::OneSided, verdict.n_checks));
        self.suites.push(SuiteReport { name: name.into(), verdict, members });
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn checks_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a CheckReport> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    /// Replaces non-finite numbers by the largest finite ones so the JSON
    /// parses back, and sets `all_passed`.
    pub fn finalize(&mut self) {
        let mut touched = Vec::new();
        let all = self.checks.iter_mut().chain(self.suites.iter_mut().flat_map(|s| s.members.iter_mut()));
        for c in all {
            let mut hit = false;
            for v in [&mut c.statistic, &mut c.stderr, &mut c.bound_or_tol] {
                hit |= finite_or_max(v);
            }
            if hit {
                c.pass = false;
                touched.push(c.name.clone());
            }
        }
        for s in &mut self.suites {
            finite_or_max(&mut s.verdict.median_z);
        }
        for v in self.diagnostics.values_mut() {
            finite_or_max(v);
        }
        for name in touched {
            self.notes.push(format!("{name}: non-finite value replaced by the largest finite one"));
        }
        self.all_passed = self.checks.iter().all(|c| c.pass);
    }

    /// Pretty JSON without runtimes; identical inputs give identical bytes.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.runtimes = None;
        let mut s = serde_json::to_string_pretty(&r).expect("report serializes");
        s.push('\n');
        s
    }
}
