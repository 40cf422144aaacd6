use std::path::{Path, PathBuf};
use std::str::FromStr;

use fpklab::coeffs::builtin_names;
use fpklab::paths::{CheckReport, GFunctional, Sided};
use fpklab::testfn::{builtin_bumps, SmoothFunction};
use serde::Serialize;

use crate::report::VerificationReport;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `report.json` (canonical) and `runtimes.json`.
    Json,
    /// `checks.csv`, `suite_members.csv`, `conditions.csv`.
    Csv,
    /// `w1.csv`, `weak_distance.csv`, `angular_partials.csv`, `condition_bands.csv`.
    Plot,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" | "csv-tables" => Ok(Self::Csv),
            "plot" | "plot-data" => Ok(Self::Plot),
            other => Err(format!("unknown format '{other}' (json, csv, plot)")),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_rows<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn sided(s: Sided) -> &'static str {
    match s {
        Sided::TwoSided => "two-sided",
        Sided::OneSided => "at-most",
        Sided::AtLeast => "at-least",
    }
}

fn check_row(c: &CheckReport) -> (&str, f64, f64, f64, &'static str, bool, usize) {
    (&c.name, c.statistic, c.stderr, c.bound_or_tol, sided(c.sided), c.pass, c.n_effective)
}

const CHECK_HEADER: [&str; 7] = ["name", "statistic", "stderr", "bound_or_tol", "sided", "pass", "n_effective"];

/// Writes the report into `dir` in the given format and returns the files written.
pub fn emit_report(report: &VerificationReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let p = |name: &str| dir.join(name);
    let mut out = Vec::new();
    match format {
        Format::Json => {
            write_text(&p("report.json"), &report.canonical_json())?;
            out.push(p("report.json"));
            let rt = serde_json::to_string_pretty(&report.runtimes).expect("runtimes serialize");
            write_text(&p("runtimes.json"), &rt)?;
            out.push(p("runtimes.json"));
        }
        Format::Csv => {
            write_rows(&p("checks.csv"), &CHECK_HEADER, report.checks.iter().map(check_row))?;
            let mut header = vec!["suite"];
            header.extend(CHECK_HEADER);
            let members = report.suites.iter().flat_map(|s| s.members.iter().map(move |m| (s.name.as_str(), check_row(m))));
            write_rows(&p("suite_members.csv"), &header, members.map(|(s, r)| (s, r.0, r.1, r.2, r.3, r.4, r.5, r.6)))?;
            let conditions = report.conditions.iter().map(|c| {
                let (v, cv, rc) = c.value.as_ref().map_or((None, None, None), |v| (Some(v.value), Some(v.coarse_value), Some(v.relative_change)));
                (&c.variant, v, cv, rc, c.error.as_deref().unwrap_or(""))
            });
            write_rows(&p("conditions.csv"), &["variant", "value", "coarse_value", "relative_change", "error"], conditions)?;
            out.extend([p("checks.csv"), p("suite_members.csv"), p("conditions.csv")]);
        }
        Format::Plot => {
            let s = &report.series;
            write_rows(&p("w1.csv"), &["t", "w1"], &s.w1)?;
            write_rows(&p("weak_distance.csv"), &["epsilon", "weak_distance"], &s.weak_distance)?;
            write_rows(
                &p("angular_partials.csv"),
                &["k", "partial", "lower_bound", "certified_floor"],
                s.angular.iter().map(|r| (r.k, r.partial, r.lower_bound, r.certified_floor)),
            )?;
            write_rows(&p("condition_bands.csv"), &["r", "trevisan", "new"], &s.condition_bands)?;
            out.extend([p("w1.csv"), p("weak_distance.csv"), p("angular_partials.csv"), p("condition_bands.csv")]);
        }
    }
    Ok(out)
}

/// Names a scenario can refer to, each list sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Registry {
    pub fields: Vec<String>,
    pub lyapunov_families: Vec<String>,
    pub test_functions: Vec<String>,
    pub g_functionals: Vec<String>,
}

pub fn list_builtins() -> Registry {
    let sorted = |mut v: Vec<String>| {
        v.sort();
        v
    };
    Registry {
        fields: sorted(builtin_names().iter().map(|s| s.to_string()).collect()),
        lyapunov_families: sorted(["log", "loglog", "power"].map(String::from).to_vec()),
        test_functions: sorted([1, 2].into_iter().flat_map(builtin_bumps).map(|b| b.label()).collect()),
        g_functionals: sorted(GFunctional::registry().iter().map(GFunctional::label).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    #[test]
    fn registry_is_sorted_and_complete() {
        let r = list_builtins();
        for list in [&r.fields, &r.lyapunov_families, &r.test_functions, &r.g_functionals] {
            assert!(list.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(r.fields.iter().any(|f| f == "ou") && r.fields.iter().any(|f| f == "polar-vortex-2d"));
        assert_eq!(r.g_functionals.len(), 7);
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let cfg = ScenarioConfig::from_json(
            r#"{"schema_version": 1, "field": {"name": "heat"}, "initial": {"kind": "delta", "point": [0.0]}, "horizon": 1.0, "conditions": []}"#,
        )
        .unwrap();
        let mut r = VerificationReport::new(cfg, None);
        for k in 0..5 {
            r.push(CheckReport::new(format!("c{k}, with comma"), k as f64, 0.0, 3.0, Sided::OneSided, 1));
        }
        r.finalize();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, Format::Csv, dir.path()).unwrap();
        let mut rd = csv::Reader::from_path(dir.path().join("checks.csv")).unwrap();
        let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 5);
        assert_eq!(&rows[4][0], "c4, with comma");
        assert_eq!(&rows[4][5], "false");
    }
}
