use std::path::{Path, PathBuf};

use mmt::mesh_refinement::{estimate_error, RefinementOptions};
use mmt::mission::{
    continuation_sweep, metrics, solve_baseline, solve_seeded, stacked_guess, ContinuationPlan, ModeSelection,
    TransferProblem, TransferSolution,
};
use mmt::nlp::NlpProblem;
use mmt::orbits::check_orbit;
use mmt::propagator::PropagatorOptions;
use mmt::transcription::{transcribe, Mesh};
use thiserror::Error;

use crate::config::{ConfigError, Format, ScenarioConfig};
use crate::report::{sweep_csv, trajectory_tables, write_atomic, Acceptance, Report, RunReport, SweepReport};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_SCHEMA: u8 = 2;
pub const EXIT_SOLVE: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

/// Default output directory when neither the flag nor the config names one.
pub const OUT_DIR_ENV: &str = "MMT_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solve failed: {0}")]
    Solve(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_SCHEMA,
            CliError::Solve(_) => EXIT_SOLVE,
            CliError::Verify(_) => EXIT_VERIFY,
            CliError::Io(_) => EXIT_OTHER,
        }
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn out_dir(flag: Option<&Path>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = cfg.and_then(|c| c.output.directory.clone()) {
        return p;
    }
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("mmt-out"))
}

pub fn load_report(path: &Path) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    Report::from_json(&text).map_err(|e| CliError::Config(ConfigError::Invalid(format!("{}: {e}", path.display()))))
}

pub fn orbits_verify(cfg: Option<&ScenarioConfig>, tolerance: f64) -> Result<(), CliError> {
    let (sys, orbits) = match cfg {
        Some(c) => (c.system()?, c.orbits_to_verify()?),
        None => (mmt::dynamics::SystemParams::earth_moon(), mmt::orbits::catalog()),
    };
    let prop = PropagatorOptions::with_tol(1e-10);
    let mut failed = Vec::new();
    for o in &orbits {
        let check = check_orbit(&sys, o, &prop).map_err(|e| CliError::Verify(format!("{}: {e}", o.label)))?;
        let ok = check.jacobi_relative_error <= 1e-10 && check.max_closure() <= tolerance;
        let residuals: Vec<String> = check.closure.iter().map(|c| format!("{c:.3e}")).collect();
        println!(
            "{} {}: jacobi relative error {:.3e}, closure [{}]",
            if ok { "PASS" } else { "FAIL" },
            o.label,
            check.jacobi_relative_error,
            residuals.join(", ")
        );
        if !ok {
            failed.push(o.label.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!("orbits {failed:?} exceed tolerance {tolerance:e}")))
    }
}

fn solve_err(e: impl std::fmt::Display) -> CliError {
    CliError::Solve(e.to_string())
}

/// Mode-1 unconstrained solution used to start everything else.
fn baseline(cfg: &ScenarioConfig) -> Result<TransferSolution, CliError> {
    if let Some(p) = &cfg.solve.warm_start {
        return match load_report(p)? {
            Report::Run(r) => Ok(r.solution),
            Report::Sweep(_) => Err(ConfigError::Invalid(format!("{}: warm start must be a run report", p.display())).into()),
        };
    }
    let mut p = cfg.problem(None)?;
    p.mode_selection = ModeSelection::OnlyMode1;
    p.domains = vec![mmt::mission::free_domain(ModeSelection::OnlyMode1)];
    log::info!("solving the mode-1 baseline");
    solve_baseline(&p, &cfg.solve.options).map_err(solve_err)
}

/// Bounds from just below the warm start's consumption down to `target`.
fn approach(start_kg: f64, target: f64, step: f64) -> Vec<f64> {
    let n = (((start_kg - target) / step).ceil() as i64 - 1).max(0);
    (0..=n).rev().map(|j| target + j as f64 * step).collect()
}

fn solve_problem(cfg: &ScenarioConfig, problem: &TransferProblem) -> Result<TransferSolution, CliError> {
    let opts = &cfg.solve.options;
    if problem.domains.len() > 1 {
        // an explicit structure is solved directly from a matching warm start
        let warm = match &cfg.solve.warm_start {
            Some(_) => baseline(cfg)?,
            None => return Err(ConfigError::Invalid("an explicit structure needs solve.warm_start".into()).into()),
        };
        return mmt::mission::solve_constrained(problem, &warm, opts).map_err(solve_err);
    }
    match (problem.mode_selection, cfg.solve.propellant_bound_kg) {
        (ModeSelection::OnlyMode1, None) if cfg.solve.warm_start.is_none() => solve_baseline(problem, opts).map_err(solve_err),
        (_, None) => solve_seeded(problem, &baseline(cfg)?, opts).map_err(solve_err),
        (_, Some(kg)) => {
            let warm = baseline(cfg)?;
            let start = warm.propellant_bound_kg.unwrap_or(warm.metrics.mode1_fuel_kg);
            let plan = ContinuationPlan::new(approach(start, kg, cfg.solve.continuation_step_kg)).map_err(solve_err)?;
            let mut entries = continuation_sweep(problem, &plan, &warm, opts);
            let last = entries.pop().expect("plan is not empty");
            last.solution.ok_or_else(|| CliError::Solve(format!("bound {kg} kg: {}", last.error.unwrap_or_default())))
        }
    }
}

fn dry_run(cfg: &ScenarioConfig, problem: &TransferProblem) -> Result<(), CliError> {
    let opts = &cfg.solve.options;
    let guess = stacked_guess(problem, &opts.stacking).map_err(solve_err)?;
    let mesh = Mesh::uniform(problem.domains.len() + 2, opts.intervals, opts.degree);
    let t = transcribe(problem, &mesh, &guess).map_err(solve_err)?;
    println!("phases {}", mesh.phases.len());
    println!("collocation points {}", mesh.total_collocation());
    println!("variables {}", t.nlp.num_variables());
    println!("constraints {}", t.nlp.num_constraints());
    println!("jacobian nonzeros {}", t.nlp.jacobian_structure().len());
    Ok(())
}

pub fn solve(cfg: &ScenarioConfig, out: &Path, tolerance: f64, dry: bool) -> Result<(), CliError> {
    let problem = cfg.problem(cfg.solve.propellant_bound_kg)?;
    if dry {
        return dry_run(cfg, &problem);
    }
    let solution = solve_problem(cfg, &problem)?;
    let acceptance = Acceptance::new(&solution, tolerance);
    print_summary(&solution);
    let report = Report::Run(RunReport { scenario: cfg.clone(), problem: cfg.echo()?, solution, acceptance });
    write_outputs(cfg, out, &report)?;
    if !acceptance.passes() {
        return Err(CliError::Solve(format!("solution not accepted (converged {}, max error {:.3e})", acceptance.converged, acceptance.max_error)));
    }
    Ok(())
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let Some(bounds) = cfg.solve.sweep_kg.clone() else {
        return Err(ConfigError::Invalid("sweep needs solve.sweep_kg".into()).into());
    };
    let plan = ContinuationPlan::new(bounds).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let problem = cfg.problem(Some(plan.bounds_kg[0]))?;
    let start = baseline(cfg)?;
    let entries = continuation_sweep(&problem, &plan, &start, &cfg.solve.options);
    let any = entries.iter().any(|e| e.solution.as_ref().is_some_and(|s| s.converged));
    let table = sweep_csv(&entries);
    print!("{table}");
    let report = Report::Sweep(SweepReport { scenario: cfg.clone(), problem: cfg.echo()?, entries });
    write_outputs(cfg, out, &report)?;
    if any {
        Ok(())
    } else {
        Err(CliError::Solve("no sweep entry converged".into()))
    }
}

fn write_outputs(cfg: &ScenarioConfig, out: &Path, report: &Report) -> Result<(), CliError> {
    let wants = |f: Format| cfg.output.formats.contains(&f);
    let mut written = Vec::new();
    if wants(Format::Json) {
        let p = out.join("report.json");
        write_atomic(&p, &report.to_json()).map_err(io(&p))?;
        written.push(p);
    }
    if wants(Format::Csv) {
        match report {
            Report::Run(r) => {
                for (name, table) in trajectory_tables(&r.solution) {
                    let p = out.join("trajectory").join(name);
                    write_atomic(&p, &table).map_err(io(&p))?;
                    written.push(p);
                }
            }
            Report::Sweep(r) => {
                let p = out.join("sweep.csv");
                write_atomic(&p, &sweep_csv(&r.entries)).map_err(io(&p))?;
                written.push(p);
                for e in &r.entries {
                    let Some(s) = &e.solution else { continue };
                    for (name, table) in trajectory_tables(s) {
                        let p = out.join(format!("trajectory_{}kg", e.bound_kg)).join(name);
                        write_atomic(&p, &table).map_err(io(&p))?;
                        written.push(p);
                    }
                }
            }
        }
    }
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(s: &TransferSolution) {
    let m = &s.metrics;
    println!("objective {:.9}", m.objective);
    println!("transfer duration {:.4} days", m.duration_days);
    println!("initial coast {:.4} days ({:.3}% of period)", m.initial_coast_days, m.initial_coast_percent);
    println!("terminal coast {:.4} days ({:.3}% of period)", m.terminal_coast_days, m.terminal_coast_percent);
    for (k, a) in m.arcs.iter().enumerate() {
        println!(
            "arc {k} ({:?}/{:?}): {:.4} days, mode-1 fuel {:.4} kg, mode-2 fuel {:.4} kg",
            a.domain.mode1, a.domain.mode2, a.duration_days, a.mode1_fuel_kg, a.mode2_fuel_kg
        );
    }
    println!("fuel {:.4} kg (mode 1 {:.4}, mode 2 {:.4})", m.total_fuel_kg, m.mode1_fuel_kg, m.mode2_fuel_kg);
    println!("switches {}", m.switch_count);
    println!("max collocation error {:.3e}, converged {}", s.max_error, s.converged);
}

/// Offending intervals of one solution, as messages.
pub fn check_solution(problem: &TransferProblem, s: &TransferSolution, tolerance: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let opts = RefinementOptions::default();
    let report = estimate_error(problem, &s.phases, &opts);
    for (i, errs) in report.errors.iter().enumerate() {
        for (k, e) in errs.iter().enumerate() {
            if *e > tolerance {
                let (a, b) = s.phases[i].interval_span(k);
                bad.push(format!("phase {i} interval {k} [{a:.9}, {b:.9}]: error {e:.3e}"));
            }
        }
    }
    if metrics(problem, &s.phases, &s.statics) != s.metrics {
        bad.push("stored metrics do not match the stored trajectory".into());
    }
    bad
}

pub fn verify_solution(path: &Path, tolerance: f64) -> Result<(), CliError> {
    let report = load_report(path)?;
    let echo = report.problem();
    let mut failures = Vec::new();
    for (label, s) in report.converged_solutions() {
        let problem = echo.problem(s.mode_selection, s.domains.clone(), s.propellant_bound_kg)?;
        let bad = check_solution(&problem, s, tolerance);
        if bad.is_empty() {
            println!("PASS {label}");
        } else {
            println!("FAIL {label}");
            for b in &bad {
                println!("  {b}");
            }
            failures.push(label);
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!("{} solution(s) exceed tolerance {tolerance:e}", failures.len())))
    }
}
