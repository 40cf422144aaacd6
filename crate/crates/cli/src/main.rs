use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fpklab::fpk::io::write_flow;
use fpklab::paths::io::write_ensemble;
use fpklab_cli::{
    emit_report, list_builtins, run_scenario_with, CheckConfig, CheckGroup, CliError, Filter, Format, ScenarioConfig, EXIT_CHECKS_FAILED,
    EXIT_OK, EXIT_STRUCTURAL,
};

#[derive(Parser)]
#[command(name = "fpklab", version, about = "Fokker–Planck–Kolmogorov verification laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Overrides the ensemble seed of the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all results are independent of this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the flow, write it to `<out>/flow`, run flow checks and condition integrals.
    SolveFpk(Common),
    /// Simulate the ensemble, write `<out>/ensemble.bin`, run path-space checks.
    Simulate(Common),
    /// Run every check of the scenario.
    Verify(Common),
    /// Run the mollification checks.
    Mollify(Common),
    /// Condition integrals and the separation check.
    Condition(Common),
    /// A-priori bound certificates and the Doob check.
    LyapunovReport(Common),
    /// The polar vortex partial sums; the scenario file is optional.
    Example32(Common),
    /// Print registered fields, Lyapunov families, test functions and functionals.
    ListBuiltins,
}

fn load(common: &Common, fallback: Option<ScenarioConfig>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match (&common.config, fallback) {
        (Some(p), _) => ScenarioConfig::load(p)?,
        (None, Some(c)) => c,
        (None, None) => return Err(CliError::ConfigInvalid("--config is required".into())),
    };
    if let (Some(seed), Some(e)) = (common.seed, cfg.ensemble.as_mut()) {
        e.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn example32_default() -> ScenarioConfig {
    let text = r#"{"schema_version": 1, "name": "example32", "field": {"name": "polar-vortex-2d"},
        "initial": {"kind": "delta", "point": [0.0, 0.0]}, "horizon": 1.0, "conditions": [],
        "checks": [{"kind": "example32"}]}"#;
    ScenarioConfig::from_json(text).expect("builtin scenario is valid")
}

fn run(command: Command) -> Result<i32> {
    let (common, filter, fallback) = match command {
        Command::ListBuiltins => {
            println!("{}", serde_json::to_string_pretty(&list_builtins())?);
            return Ok(EXIT_OK);
        }
        Command::SolveFpk(c) => (c, Filter { force_flow: true, conditions: true, ..Filter::only(&[CheckGroup::Flow]) }, None),
        Command::Simulate(c) => (c, Filter { force_ensemble: true, ..Filter::only(&[CheckGroup::Paths]) }, None),
        Command::Verify(c) => (c, Filter::all(), None),
        Command::Mollify(c) => (c, Filter::only(&[CheckGroup::Mollify]), None),
        Command::Condition(c) => (c, Filter { conditions: true, ..Filter::only(&[CheckGroup::Condition]) }, None),
        Command::LyapunovReport(c) => (c, Filter::only(&[CheckGroup::Lyapunov]), None),
        Command::Example32(c) => (c, Filter::only(&[CheckGroup::Example32]), Some(example32_default())),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    let mut cfg = load(&common, fallback)?;
    if filter.groups.as_deref() == Some(&[CheckGroup::Example32][..]) && !cfg.checks.iter().any(|c| matches!(c, CheckConfig::Example32 { .. })) {
        cfg.checks.push(example32_default().checks.remove(0));
    }
    let outcome = run_scenario_with(&cfg, &filter)?;
    let out: &Path = &common.out;
    if filter.force_flow {
        if let Some(flow) = &outcome.flow {
            write_flow(&out.join("flow"), flow).map_err(CliError::from)?;
        }
    }
    if filter.force_ensemble {
        if let Some(ens) = &outcome.ensemble {
            std::fs::create_dir_all(out).map_err(CliError::from)?;
            write_ensemble(&out.join("ensemble.bin"), ens).map_err(CliError::from)?;
        }
    }
    emit_report(&outcome.report, common.format, out)?;
    let r = &outcome.report;
    for c in &r.checks {
        println!("{} {}: {:.6e} (bound {:.6e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.statistic, c.bound_or_tol);
    }
    for c in &r.conditions {
        match (&c.value, &c.error) {
            (Some(v), _) => println!("condition {}: {:.6e}", c.variant, v.value),
            (None, Some(e)) => println!("condition {}: not computed ({e})", c.variant),
            _ => {}
        }
    }
    Ok(if r.all_passed { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_STRUCTURAL as u8)
        }
    }
}
