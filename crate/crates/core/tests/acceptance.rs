//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. The transfer solves are shared between criteria.

#[macro_use]
mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::nlp_cases::{argmin_tol, cases};
use mmt::dynamics::{
    jacobi_constant, pseudopotential, pseudopotential_gradient, Cr3bpModel, Er3bpModel, SpacecraftParams, SystemParams,
};
use mmt::mesh_refinement::{estimate_error, RefinementOptions};
use mmt::mission::{
    continuation_sweep, metrics, solve_baseline, solve_seeded, ContinuationPlan, ModeSelection, SolveOptions,
    SweepEntry, TransferProblem, TransferSolution,
};
use mmt::nlp::{SolveStatus, SolverOptions};
use mmt::orbits::{check_orbit, lookup, L2_SOUTHERN_HALO, NRHO};
use mmt::propagator::PropagatorOptions;
use mmt::transcription::{differentiation_matrix, lgr_points_weights, lgr::support_points};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MULTI_BOUNDS: [f64; 5] = [40.0, 30.0, 20.0, 10.0, 1.0];
const SINGLE_BOUNDS: [f64; 3] = [40.0, 30.0, 20.0];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn problem(sc: SpacecraftParams, sel: ModeSelection) -> TransferProblem {
    TransferProblem::unconstrained(
        SystemParams::earth_moon(),
        sc,
        lookup(L2_SOUTHERN_HALO).unwrap(),
        lookup(NRHO).unwrap(),
        sel,
    )
}

fn jacobi() -> Outcome {
    let sys = SystemParams::earth_moon();
    let mut detail = Vec::new();
    let mut ok = true;
    for (label, want) in [(L2_SOUTHERN_HALO, 3.1141257613953099), (NRHO, 3.0032754028672501)] {
        let j = jacobi_constant(&sys, &lookup(label).unwrap().defining_state).map_err(|e| e.to_string())?;
        let r = rel(j, want);
        ok &= r <= 1e-10;
        detail.push(format!("{label} rel {r:.1e}"));
    }
    check(ok, detail.join(", "))
}

fn closure() -> Outcome {
    let sys = SystemParams::earth_moon();
    let mut detail = Vec::new();
    let mut ok = true;
    for (label, period) in [(L2_SOUTHERN_HALO, 3.3325377871055926), (NRHO, 1.8077163954358124)] {
        let orbit = lookup(label).unwrap();
        ok &= orbit.period == period;
        let t = Instant::now();
        let c = check_orbit(&sys, &orbit, &PropagatorOptions::with_tol(1e-10)).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        ok &= c.max_closure() <= 1e-6 && secs < 1.0;
        detail.push(format!("{label} closure {:.1e} in {secs:.2} s", c.max_closure()));
    }
    check(ok, detail.join(", "))
}

fn gradients() -> Outcome {
    let sys = SystemParams::earth_moon();
    let circ = sys.circular();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_grad = 0.0f64;
    let mut worst_rhs = 0.0f64;
    let cr = Cr3bpModel::new(&circ);
    let er = Er3bpModel::new(&circ, &SpacecraftParams::case1());
    for _ in 0..100 {
        let p = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)];
        let nu = rng.gen_range(0.0..std::f64::consts::TAU);
        let g = pseudopotential_gradient(&sys, p[0], p[1], p[2], nu).map_err(|e| e.to_string())?;
        for i in 0..3 {
            let h = 1e-5;
            let (mut a, mut b) = (p, p);
            a[i] += h;
            b[i] -= h;
            let fa = pseudopotential(&sys, a[0], a[1], a[2], nu).unwrap();
            let fb = pseudopotential(&sys, b[0], b[1], b[2], nu).unwrap();
            let fd = (fa - fb) / (2.0 * h);
            worst_grad = worst_grad.max((g[i] - fd).abs() / g[i].abs().max(1.0));
        }
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let x7 = [p[0], p[1], p[2], v[0], v[1], v[2], 0.0];
        let x8 = [p[0], p[1], p[2], v[0], v[1], v[2], 0.0, rng.gen_range(0.5..1.0)];
        let c = cr.rhs(&x7).unwrap();
        let e = er.rhs(&x8, &[1.0, 0.0, 0.0, 0.0, 0.0], nu).unwrap();
        for i in 0..6 {
            worst_rhs = worst_rhs.max((c[i] - e[i]).abs());
        }
        worst_rhs = worst_rhs.max(e[7].abs());
    }
    check(
        worst_grad <= 1e-6 && worst_rhs == 0.0,
        format!("gradient rel {worst_grad:.1e}, e=0 rhs mismatch {worst_rhs:.1e}"),
    )
}

fn collocation() -> Outcome {
    let (mut quad, mut diff) = (0.0f64, 0.0f64);
    for n in 1..=12usize {
        let (p, w) = lgr_points_weights(n);
        for k in 0..=(2 * n - 2) as i32 {
            let q: f64 = p.iter().zip(&w).map(|(x, wi)| wi * x.powi(k)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k + 1) as f64 } else { 0.0 };
            quad = quad.max((q - exact).abs());
        }
        let s = support_points(n);
        let d = differentiation_matrix(n);
        for k in 0..=n as i32 {
            for i in 0..n {
                let v: f64 = (0..=n).map(|j| d[i][j] * s[j].powi(k)).sum();
                let exact = if k == 0 { 0.0 } else { k as f64 * s[i].powi(k - 1) };
                diff = diff.max((v - exact).abs());
            }
        }
    }
    check(quad <= 1e-13 && diff <= 1e-12, format!("quadrature {quad:.1e}, differentiation {diff:.1e}"))
}

fn baseline_criterion(b: &TransferSolution) -> Outcome {
    let m = &b.metrics;
    let sys = SystemParams::earth_moon();
    let flow = SpacecraftParams::case1().full_throttle_flow(&sys, 0);
    let constant_flow = flow * m.duration_days * 86400.0;
    let consistency = rel(m.mode1_fuel_kg, constant_flow).max(rel(m.total_fuel_kg, constant_flow));
    let detail = format!(
        "J {:.6}, fuel {:.3} kg, coasts {:.3}% / {:.3}%, saturation {:.4}, constant-flow rel {consistency:.1e}",
        m.objective, m.mode1_fuel_kg, m.initial_coast_percent, m.terminal_coast_percent, m.mode1_saturation
    );
    check(
        b.converged
            && rel(m.objective, 0.285471) <= 0.02
            && rel(m.mode1_fuel_kg, 40.973) <= 0.02
            && (m.initial_coast_percent - 52.471).abs() <= 2.0
            && (m.terminal_coast_percent - 48.928).abs() <= 2.0
            && m.mode1_saturation >= 0.99
            && consistency <= 1e-6,
        detail,
    )
}

fn at(entries: &[SweepEntry], kg: f64) -> Option<&TransferSolution> {
    entries.iter().find(|e| e.bound_kg == kg).and_then(|e| e.solution.as_ref()).filter(|s| s.converged)
}

fn constrained(single: &[SweepEntry]) -> Outcome {
    let s40 = at(single, 40.0).ok_or("40 kg not converged")?;
    let s20 = at(single, 20.0).ok_or("20 kg not converged")?;
    let arcs: Vec<f64> = s40.metrics.arcs.iter().map(|a| a.duration_days).collect();
    let want = [1.063, 0.043, 0.072];
    let split_ok = arcs.len() == 3 && arcs.iter().zip(want).all(|(a, w)| (a - w).abs() <= 0.02);
    check(
        rel(s40.metrics.objective, 0.289159) <= 0.02 && split_ok && rel(s20.metrics.objective, 0.632199) <= 0.03,
        format!(
            "40 kg J {:.6} arcs {:?} d, 20 kg J {:.6}",
            s40.metrics.objective,
            arcs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            s20.metrics.objective
        ),
    )
}

fn multimode(case1: &[SweepEntry], mode2: &[Result<TransferSolution, String>; 2]) -> Outcome {
    let s = at(case1, 40.0).ok_or("multi-mode 40 kg not converged")?;
    let mut days = Vec::new();
    for r in mode2 {
        let m = r.as_ref().map_err(|e| format!("mode-2-only solve failed: {e}"))?;
        if !m.converged {
            return Err("mode-2-only solve not converged".into());
        }
        days.push(m.metrics.duration_days);
    }
    check(
        rel(s.metrics.objective, 0.287961) <= 0.02
            && (s.metrics.total_fuel_kg - 40.048).abs() <= 0.2
            && rel(days[0], 1.850) <= 0.03
            && rel(days[1], 2.749) <= 0.03,
        format!(
            "J {:.6}, total fuel {:.3} kg, mode-2-only {:.4} d / {:.4} d",
            s.metrics.objective, s.metrics.total_fuel_kg, days[0], days[1]
        ),
    )
}

fn structural(single: &[SweepEntry], multi: &[&[SweepEntry]; 2]) -> Outcome {
    let mut problems = Vec::new();
    let mut budget = 0.0f64;
    for sweep in std::iter::once(single).chain(multi.iter().copied()) {
        let mut last: Option<f64> = None;
        for e in sweep {
            let Some(s) = e.solution.as_ref().filter(|s| s.converged) else { continue };
            budget = budget.max((s.metrics.mode1_fuel_kg - e.bound_kg).abs());
            if let Some(prev) = last {
                if s.metrics.duration_days < prev {
                    problems.push(format!("duration falls at {} kg", e.bound_kg));
                }
            }
            last = Some(s.metrics.duration_days);
        }
    }
    if budget > 1e-3 {
        problems.push(format!("unused mode-1 budget {budget:.1e} kg"));
    }
    for (i, sweep) in multi.iter().enumerate() {
        for kg in SINGLE_BOUNDS {
            if let (Some(m), Some(s)) = (at(sweep, kg), at(single, kg)) {
                if m.metrics.duration_days > s.metrics.duration_days {
                    problems.push(format!("case {} slower than single mode at {kg} kg", i + 1));
                }
            }
        }
        let counts: Vec<usize> = MULTI_BOUNDS.iter().filter_map(|kg| at(sweep, *kg)).map(|s| s.metrics.switch_count).collect();
        let drop = counts.iter().position(|c| *c == 2).is_some_and(|i| counts[i..].contains(&1));
        if !drop {
            problems.push(format!("case {} switch counts {counts:?} never drop from 2 to 1", i + 1));
        }
    }
    let converged = |s: &[SweepEntry]| s.iter().filter(|e| e.solution.as_ref().is_some_and(|s| s.converged)).count();
    let detail = format!(
        "converged {}/{} single, {}/{} and {}/{} multi-mode, max budget gap {budget:.1e} kg",
        converged(single),
        single.len(),
        converged(multi[0]),
        multi[0].len(),
        converged(multi[1]),
        multi[1].len()
    );
    if problems.is_empty() { Ok(detail) } else { Err(format!("{detail}; {}", problems.join("; "))) }
}

/// Re-propagation of every interval plus recomputed metrics.
fn verify(base: &TransferProblem, s: &TransferSolution, tol: f64) -> Result<f64, String> {
    let mut p = base.clone().with_bound_kg(s.propellant_bound_kg);
    p.mode_selection = s.mode_selection;
    p.domains = s.domains.clone();
    let report = estimate_error(&p, &s.phases, &RefinementOptions::default());
    if metrics(&p, &s.phases, &s.statics) != s.metrics {
        return Err("stored metrics differ from the trajectory".into());
    }
    if report.max_error > tol {
        return Err(format!("error {:.2e}", report.max_error));
    }
    Ok(report.max_error)
}

fn gate(all: &[(String, TransferProblem, TransferSolution)]) -> Outcome {
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let t = Instant::now();
    for (label, p, s) in all.iter().filter(|(_, _, s)| s.converged) {
        match verify(p, s, 1e-6) {
            Ok(e) => worst = worst.max(e),
            Err(e) => failed.push(format!("{label}: {e}")),
        }
    }
    let n = all.iter().filter(|(_, _, s)| s.converged).count();
    let detail = format!("{n} converged solutions, max error {worst:.2e}, {:.1} s", t.elapsed().as_secs_f64());
    if failed.is_empty() { Ok(detail) } else { Err(format!("{detail}; {}", failed.join("; "))) }
}

fn nlp_suite() -> Outcome {
    let opts = SolverOptions::default();
    let all = cases();
    let mut failed = Vec::new();
    let mut undeclared = 0;
    for (make, case) in &all {
        let p = make(1.0);
        let sol = p.run(&case.z0, &opts);
        let close = sol.z.iter().zip(&case.z_star).all(|(a, b)| (a - b).abs() <= argmin_tol(case.name));
        if sol.status != SolveStatus::Optimal || sol.feasibility > 1e-8 || sol.stationarity > 1e-8 || !close {
            failed.push(case.name);
        }
        undeclared += p.probe(&case.z0).undeclared.len();
    }
    check(
        all.len() >= 10 && failed.is_empty() && undeclared == 0,
        format!("{} problems, failed {failed:?}, undeclared entries {undeclared}", all.len()),
    )
}

fn report(n: usize, name: &str, outcome: &Outcome) -> bool {
    match outcome {
        Ok(d) => println!("PASS {n:>2} {name}: {d}"),
        Err(d) => println!("FAIL {n:>2} {name}: {d}"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let started = Instant::now();
    let opts = SolveOptions::default();
    let single = problem(SpacecraftParams::case1(), ModeSelection::OnlyMode1);
    let case1 = problem(SpacecraftParams::case1(), ModeSelection::MultiMode);
    let case2 = problem(SpacecraftParams::case2(), ModeSelection::MultiMode);

    let baseline = solve_baseline(&single, &opts).map_err(|e| e.to_string());
    let (single_sweep, multi1, multi2, mode2) = match &baseline {
        Ok(b) => {
            let plan = |v: &[f64]| ContinuationPlan::new(v.to_vec()).unwrap();
            let seeded = |sc| {
                solve_seeded(&problem(sc, ModeSelection::OnlyMode2), b, &opts).map_err(|e| e.to_string())
            };
            (
                continuation_sweep(&single, &plan(&SINGLE_BOUNDS), b, &opts),
                continuation_sweep(&case1, &plan(&MULTI_BOUNDS), b, &opts),
                continuation_sweep(&case2, &plan(&MULTI_BOUNDS), b, &opts),
                [seeded(SpacecraftParams::case1()), seeded(SpacecraftParams::case2())],
            )
        }
        Err(e) => (Vec::new(), Vec::new(), Vec::new(), [Err(e.clone()), Err(e.clone())]),
    };

    let mut solved: Vec<(String, TransferProblem, TransferSolution)> = Vec::new();
    if let Ok(b) = &baseline {
        solved.push(("baseline".into(), single.clone(), b.clone()));
    }
    for (label, p, sweep) in [("only-mode-1", &single, &single_sweep), ("case 1", &case1, &multi1), ("case 2", &case2, &multi2)] {
        for e in sweep {
            if let Some(s) = &e.solution {
                solved.push((format!("{label} {} kg", e.bound_kg), p.clone(), s.clone()));
            }
        }
    }
    for (label, sc, r) in [("mode-2-only 0.5 N", SpacecraftParams::case1(), &mode2[0]), ("mode-2-only 0.25 N", SpacecraftParams::case2(), &mode2[1])] {
        if let Ok(s) = r {
            solved.push((label.into(), problem(sc, ModeSelection::OnlyMode2), s.clone()));
        }
    }

    let results = [
        ("jacobi reproduction", jacobi()),
        ("orbit closure", closure()),
        ("gradient suite", gradients()),
        ("collocation exactness", collocation()),
        ("baseline reproduction", baseline.clone().and_then(|b| baseline_criterion(&b))),
        ("constrained reproduction", constrained(&single_sweep)),
        ("multi-mode reproduction", multimode(&multi1, &mode2)),
        ("structural properties", structural(&single_sweep, &[&multi1, &multi2])),
        ("verification gate", gate(&solved)),
        ("nlp regression suite", nlp_suite()),
    ];
    let mut all = true;
    for (i, (name, outcome)) in results.iter().enumerate() {
        all &= report(i + 1, name, outcome);
    }
    println!("acceptance finished in {:.0} s", started.elapsed().as_secs_f64());
    if all { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
