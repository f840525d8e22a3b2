//! Baseline, structure detection, partitioned solves and continuation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::guess::{stacked_guess, StackingOptions};
use super::problem::{free_domain, three_domain_template, Activity, Domain, ModeSelection, TransferProblem};
use crate::dynamics::{char_time, mass_flow};
use crate::mesh_refinement::{refine_loop, Jump, RefinementError, RefinementOptions, RefinementOutcome, RefinementStep};
use crate::nlp::SolverOptions;
use crate::orbits::OrbitError;
use crate::transcription::{
    lgr_points_weights, pair_to_fraction, Guess, Mesh, PhaseGuess, PhaseHistory, PhaseSolution, PhaseTable,
};

/// Domains shorter than this [days] are treated as removed.
pub const VANISHING_ARC_DAYS: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Refinement(#[from] RefinementError),
    #[error("no start of the multistart grid converged")]
    NoConvergedStart,
    #[error("{0}")]
    Invalid(String),
}

/// Grid of stacking cuts tried by [`solve_baseline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiStart {
    pub initial_anomalies: Vec<f64>,
    pub departure_fractions: Vec<f64>,
    pub arrival_fractions: Vec<f64>,
    /// Converged refinements sought before the best is returned.
    pub candidates: usize,
    /// NLP iteration cap for each coarse start.
    pub max_iterations: usize,
}

impl Default for MultiStart {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        Self {
            initial_anomalies: vec![0.0, FRAC_PI_2, 2.0 * FRAC_PI_2, 3.0 * FRAC_PI_2],
            departure_fractions: vec![0.3, 0.5, 0.7],
            arrival_fractions: vec![0.1, 0.5, 0.9],
            candidates: 3,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Intervals per phase of the initial mesh.
    pub intervals: usize,
    pub degree: usize,
    pub refinement: RefinementOptions,
    pub solver: SolverOptions,
    /// Solver settings for solves started from a converged solution.
    pub warm_solver: SolverOptions,
    pub stacking: StackingOptions,
    pub multistart: MultiStart,
    /// Refinement iterations spent on the single-domain solve used only to
    /// locate switches.
    pub structure_iterations: usize,
    /// Samples per domain when a solution is cut into domain guesses.
    pub window_samples: usize,
    /// Halvings allowed when a continuation step fails.
    pub continuation_depth: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            intervals: 10,
            degree: 4,
            refinement: RefinementOptions::default(),
            solver: SolverOptions::default(),
            warm_solver: SolverOptions { initial_barrier: 1e-4, bound_push: 1e-6, max_iterations: 1000, ..SolverOptions::default() },
            stacking: StackingOptions::default(),
            multistart: MultiStart::default(),
            structure_iterations: 4,
            window_samples: 400,
            continuation_depth: 3,
        }
    }
}

impl SolveOptions {
    fn mesh(&self, phases: usize) -> Mesh {
        Mesh::uniform(phases, self.intervals, self.degree)
    }
}

/// One transfer domain of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcMetrics {
    pub domain: Domain,
    pub nu0: f64,
    pub nuf: f64,
    pub duration_days: f64,
    pub mode1_fuel_kg: f64,
    pub mode2_fuel_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub objective: f64,
    pub duration_days: f64,
    pub initial_coast_days: f64,
    pub terminal_coast_days: f64,
    pub initial_coast_percent: f64,
    pub terminal_coast_percent: f64,
    /// Anomalies at departure and arrival.
    pub departure_anomaly: f64,
    pub arrival_anomaly: f64,
    /// Normalized times at departure and arrival.
    pub departure_time: f64,
    pub arrival_time: f64,
    pub arcs: Vec<ArcMetrics>,
    /// Anomalies of the boundaries between domains that both persist.
    pub switch_anomalies: Vec<f64>,
    pub switch_count: usize,
    pub mode1_fuel_kg: f64,
    pub mode2_fuel_kg: f64,
    pub total_fuel_kg: f64,
    /// Fraction of transfer collocation points with mode-1 throttle above 0.999.
    pub mode1_saturation: f64,
}

/// A converged (or best available) transfer with its reporting quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSolution {
    pub mode_selection: ModeSelection,
    pub propellant_bound_kg: Option<f64>,
    pub domains: Vec<Domain>,
    pub phases: Vec<PhaseSolution>,
    pub statics: [f64; 6],
    pub nlp_iterations: usize,
    /// Collocation error tolerance met on the final mesh.
    pub converged: bool,
    pub max_error: f64,
    pub metrics: Metrics,
    pub history: Vec<RefinementStep>,
}

impl TransferSolution {
    fn from_outcome(problem: &TransferProblem, out: RefinementOutcome) -> Self {
        let metrics = metrics(problem, &out.phases, &out.statics);
        let max_error = out.final_report().max_error;
        Self {
            mode_selection: problem.mode_selection,
            propellant_bound_kg: problem.propellant_bound.map(|b| b * problem.sc.m0),
            domains: problem.domains.clone(),
            phases: out.phases,
            statics: out.statics,
            nlp_iterations: out.history.iter().map(|h| h.nlp_iterations).sum(),
            converged: out.converged,
            max_error,
            metrics,
            history: out.history,
        }
    }

    pub fn jumps(&self) -> Vec<Jump> {
        self.history.last().map(|h| h.report.jumps.clone()).unwrap_or_default()
    }

    fn transfer_phases(&self) -> &[PhaseSolution] {
        &self.phases[1..self.phases.len() - 1]
    }

    fn guess(&self) -> Guess {
        Guess::from_solution(&self.phases, self.statics)
    }
}

/// `∫ f` over a phase by its own collocation quadrature.
fn quadrature(phase: &PhaseSolution, f: impl Fn(&[f64], &[f64], f64) -> f64) -> f64 {
    let mut acc = 0.0;
    let span = phase.nuf - phase.nu0;
    let mut idx = 0;
    for k in 0..phase.mesh.num_intervals() {
        let n = phase.mesh.degrees[k];
        let (pts, wts) = lgr_points_weights(n);
        let (a, b) = (phase.mesh.fractions[k], phase.mesh.fractions[k + 1]);
        let half = 0.5 * (b - a) * span;
        for j in 0..n {
            let nu = phase.nu0 + span * (a + (b - a) * 0.5 * (pts[j] + 1.0));
            acc += half * wts[j] * f(&phase.states[idx], &phase.controls[idx], nu);
            idx += 1;
        }
    }
    acc
}

/// Reporting quantities of a collocated solution.
pub fn metrics(problem: &TransferProblem, phases: &[PhaseSolution], statics: &[f64; 6]) -> Metrics {
    let sys = &problem.sys;
    let sc = &problem.sc;
    let t0 = char_time(sys, 0.0);
    let days = |tau: f64| tau * t0 / 86400.0;
    let transfer = &phases[1..phases.len() - 1];
    let first = transfer.first().expect("a transfer domain");
    let last = transfer.last().expect("a transfer domain");
    let tau0 = first.states[0][6];
    let tauf = last.states.last().unwrap()[6];
    let objective = tauf - tau0;
    let f0 = pair_to_fraction(statics[0], statics[1]);
    let ff = pair_to_fraction(statics[2], statics[3]);

    let arcs: Vec<ArcMetrics> = transfer
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let m1 = quadrature(p, |_, u, nu| -mass_flow(sys, sc, u[3], 0.0, nu)) * sc.m0;
            let dm = (p.states[0][7] - p.states.last().unwrap()[7]) * sc.m0;
            ArcMetrics {
                domain: problem.domains.get(k).copied().unwrap_or(Domain::new(Activity::Free, Activity::Free)),
                nu0: p.nu0,
                nuf: p.nuf,
                duration_days: days(p.states.last().unwrap()[6] - p.states[0][6]),
                mode1_fuel_kg: m1,
                mode2_fuel_kg: dm - m1,
            }
        })
        .collect();
    let live: Vec<&ArcMetrics> = arcs.iter().filter(|a| a.duration_days > VANISHING_ARC_DAYS).collect();
    let switch_anomalies: Vec<f64> = if arcs.len() > 1 {
        live.windows(2).filter(|w| w[0].domain != w[1].domain).map(|w| w[1].nu0).collect()
    } else {
        Vec::new()
    };
    let total = (first.states[0][7] - last.states.last().unwrap()[7]) * sc.m0;
    let mode1: f64 = arcs.iter().map(|a| a.mode1_fuel_kg).sum();
    let (mut sat, mut count) = (0usize, 0usize);
    for p in transfer {
        for u in &p.controls {
            count += 1;
            sat += usize::from(u[3] > 0.999);
        }
    }
    Metrics {
        objective,
        duration_days: days(objective),
        initial_coast_days: f0 * problem.initial_orbit.period_days(sys),
        terminal_coast_days: ff * problem.terminal_orbit.period_days(sys),
        initial_coast_percent: 100.0 * f0,
        terminal_coast_percent: 100.0 * ff,
        departure_anomaly: first.nu0,
        arrival_anomaly: last.nuf,
        departure_time: tau0,
        arrival_time: tauf,
        switch_count: switch_anomalies.len(),
        switch_anomalies,
        mode1_fuel_kg: mode1,
        mode2_fuel_kg: total - mode1,
        total_fuel_kg: total,
        mode1_saturation: if count > 0 { sat as f64 / count as f64 } else { 0.0 },
        arcs,
    }
}

fn solve_from(
    problem: &TransferProblem,
    mesh: &Mesh,
    guess: &Guess,
    refinement: &RefinementOptions,
    solver: &SolverOptions,
    opts: &SolveOptions,
) -> Result<TransferSolution, MissionError> {
    let out = refine_loop(problem, mesh, guess, refinement, solver, &opts.warm_solver)?;
    Ok(TransferSolution::from_outcome(problem, out))
}

/// Minimum-time solution from stacked guesses. Every cut of the multistart
/// grid is solved on the initial mesh; distinct coarse optima are refined
/// in order of objective until `candidates` of them converge, and the best
/// converged one is returned.
pub fn solve_baseline(problem: &TransferProblem, opts: &SolveOptions) -> Result<TransferSolution, MissionError> {
    if problem.domains.len() != 1 {
        return Err(MissionError::Invalid("baseline needs a single transfer domain".into()));
    }
    let mesh = opts.mesh(3);
    let coarse = RefinementOptions { max_iterations: 1, ..opts.refinement.clone() };
    let ms = &opts.multistart;
    let mut starts = Vec::new();
    for &nu in &ms.initial_anomalies {
        for &f0 in &ms.departure_fractions {
            for &ff in &ms.arrival_fractions {
                starts.push(StackingOptions {
                    initial_anomaly: nu,
                    departure_fraction: f0,
                    arrival_fraction: ff,
                    ..opts.stacking
                });
            }
        }
    }
    if starts.is_empty() {
        starts.push(opts.stacking);
    }
    let mut coarse_runs: Vec<(f64, Guess)> = Vec::new();
    for st in &starts {
        let guess = stacked_guess(problem, st)?;
        let capped = SolverOptions { max_iterations: ms.max_iterations, ..opts.solver.clone() };
        match solve_from(problem, &mesh, &guess, &coarse, &capped, opts) {
            Ok(s) => {
                log::debug!("start {st:?}: J = {}", s.metrics.objective);
                coarse_runs.push((s.metrics.objective, s.guess()));
            }
            Err(e) => log::debug!("start {st:?} failed: {e}"),
        }
    }
    coarse_runs.sort_by(|a, b| a.0.total_cmp(&b.0));
    coarse_runs.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-6 * (1.0 + b.0.abs()));
    // coarse optima that are mesh artifacts fail in refinement, so the list
    // is walked until enough candidates converge
    let mut best: Option<TransferSolution> = None;
    let mut converged = 0;
    for (j, guess) in &coarse_runs {
        if converged >= ms.candidates.max(1) {
            break;
        }
        match solve_from(problem, &mesh, guess, &opts.refinement, &opts.warm_solver, opts) {
            Ok(s) => {
                log::info!("candidate J = {j:.6} refined to {:.6} (converged {})", s.metrics.objective, s.converged);
                converged += usize::from(s.converged);
                let better = match &best {
                    None => true,
                    Some(b) => (s.converged, -s.metrics.objective) > (b.converged, -b.metrics.objective),
                };
                if better {
                    best = Some(s);
                }
            }
            Err(e) => log::info!("candidate J = {j:.6} failed in refinement: {e}"),
        }
    }
    best.ok_or(MissionError::NoConvergedStart)
}

/// Unbounded single-domain solve started from another transfer's
/// trajectory, typically the mode-1 baseline seeding a mode-2-only problem.
/// Throttles of excluded modes are replaced by their fixed values.
pub fn solve_seeded(
    problem: &TransferProblem,
    seed: &TransferSolution,
    opts: &SolveOptions,
) -> Result<TransferSolution, MissionError> {
    if problem.domains.len() != 1 || seed.phases.len() != 3 {
        return Err(MissionError::Invalid("seeded solve needs single-domain problem and seed".into()));
    }
    let mesh = opts.mesh(3);
    solve_from(problem, &mesh, &seed.guess(), &opts.refinement, &opts.solver, opts)
}

/// Table guess for the part `[a, b]` of a collocated phase.
fn window(phase: &PhaseSolution, a: f64, b: f64, samples: usize, throttle: Option<[f64; 2]>) -> PhaseGuess {
    let span = phase.nuf - phase.nu0;
    let n = samples.max(2);
    let fractions: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let at = |s: f64| if span > 0.0 { ((a + s * (b - a) - phase.nu0) / span).clamp(0.0, 1.0) } else { 0.0 };
    let states = fractions.iter().map(|s| phase.state_at_fraction(at(*s))).collect();
    let controls = fractions
        .iter()
        .map(|s| {
            let mut u = phase.control_at_fraction(at(*s));
            if let Some(t) = throttle {
                u[3] = t[0];
                u[4] = t[1];
            }
            u
        })
        .collect();
    PhaseGuess { nu0: a, nuf: b, history: PhaseHistory::Table(PhaseTable { fractions, states, controls }) }
}

/// Switch anomalies for the three-domain template from detected jumps:
/// the first and last jump of the mode-1 throttle.
pub fn switch_estimates(jumps: &[Jump], phase: &PhaseSolution) -> Option<(f64, f64)> {
    let mut m1: Vec<&Jump> = jumps.iter().filter(|j| j.component == 3).collect();
    m1.sort_by(|a, b| a.nu.total_cmp(&b.nu));
    match m1.as_slice() {
        [] => None,
        [only] if only.size < 0.0 => Some((only.nu, phase.nuf)),
        [only] => Some((phase.nu0, only.nu)),
        [first, .., last] => {
            if m1.len() > 2 {
                log::warn!("{} throttle jumps detected, using the three-domain template", m1.len());
            }
            Some((first.nu, last.nu))
        }
    }
}

/// The problem with its single transfer domain replaced by the three-domain
/// template, and a guess cut from `solution` at the detected switches. With
/// no detected switch the problem and guess are returned unchanged.
pub fn partition_from_structure(
    problem: &TransferProblem,
    solution: &TransferSolution,
    jumps: &[Jump],
    samples: usize,
) -> (TransferProblem, Guess) {
    let transfer = &solution.transfer_phases()[0];
    let Some((a, b)) = switch_estimates(jumps, transfer) else {
        return (problem.clone(), solution.guess());
    };
    let mut p = problem.clone();
    p.domains = three_domain_template(problem.mode_selection);
    let cuts = [transfer.nu0, a, b, transfer.nuf];
    let mut phases = vec![PhaseGuess {
        nu0: solution.phases[0].nu0,
        nuf: solution.phases[0].nuf,
        history: PhaseHistory::Collocated(solution.phases[0].clone()),
    }];
    for (k, d) in p.domains.iter().enumerate() {
        let th = [d.mode1.fixed_value().unwrap_or(0.0), d.mode2.fixed_value().unwrap_or(0.0)];
        phases.push(window(transfer, cuts[k], cuts[k + 1], samples, Some(th)));
    }
    let last = solution.phases.last().unwrap();
    phases.push(PhaseGuess { nu0: last.nu0, nuf: last.nuf, history: PhaseHistory::Collocated(last.clone()) });
    (p, Guess { phases, statics: solution.statics })
}

/// Mesh for a warm start: the previous meshes when the phase count matches,
/// uniform otherwise.
fn warm_mesh(solution: &TransferSolution, phases: usize, opts: &SolveOptions) -> Mesh {
    if solution.phases.len() == phases {
        Mesh { phases: solution.phases.iter().map(|p| p.mesh.clone()).collect() }
    } else {
        let mut m = opts.mesh(phases);
        m.phases[0] = solution.phases[0].mesh.clone();
        m.phases[phases - 1] = solution.phases.last().unwrap().mesh.clone();
        m
    }
}

/// Bounded solve warm-started from `warm`. When `problem` has a single
/// free domain, the switches are first located on that domain and the
/// problem is re-solved with the three-domain template.
pub fn solve_constrained(
    problem: &TransferProblem,
    warm: &TransferSolution,
    opts: &SolveOptions,
) -> Result<TransferSolution, MissionError> {
    if problem.propellant_bound.is_none() {
        return Err(MissionError::Invalid("constrained solve needs a propellant bound".into()));
    }
    let phases = problem.domains.len() + 2;
    if problem.domains.len() == 1 && problem.domains[0].mode1 == Activity::Free {
        // switches are located with mode 1 alone, which avoids the
        // complementarity row of a free multi-mode domain
        let mut single = problem.clone();
        single.mode_selection = ModeSelection::OnlyMode1;
        single.domains = vec![free_domain(ModeSelection::OnlyMode1)];
        let structure_opts = RefinementOptions { max_iterations: opts.structure_iterations.max(1), ..opts.refinement.clone() };
        let mesh = warm_mesh(warm, phases, opts);
        let free = solve_from(&single, &mesh, &warm.guess(), &structure_opts, &opts.warm_solver, opts)?;
        let jumps = free.jumps();
        let (split, guess) = partition_from_structure(problem, &free, &jumps, opts.window_samples);
        if split.domains.len() == 1 {
            return solve_from(problem, &warm_mesh(&free, phases, opts), &free.guess(), &opts.refinement, &opts.warm_solver, opts);
        }
        let mesh = warm_mesh(&free, split.domains.len() + 2, opts);
        return solve_from(&split, &mesh, &guess, &opts.refinement, &opts.warm_solver, opts);
    }
    let guess = if warm.phases.len() == phases {
        warm.guess()
    } else {
        return Err(MissionError::Invalid(format!(
            "warm start has {} phases, problem needs {phases}",
            warm.phases.len()
        )));
    };
    solve_from(problem, &warm_mesh(warm, phases, opts), &guess, &opts.refinement, &opts.warm_solver, opts)
}

/// Strictly decreasing list of propellant bounds [kg].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPlan {
    pub bounds_kg: Vec<f64>,
}

impl ContinuationPlan {
    pub fn new(bounds_kg: Vec<f64>) -> Result<Self, MissionError> {
        if bounds_kg.is_empty() || bounds_kg.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(MissionError::Invalid("continuation bounds must be strictly decreasing".into()));
        }
        if bounds_kg.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(MissionError::Invalid("continuation bounds must be nonnegative".into()));
        }
        Ok(Self { bounds_kg })
    }

    /// `from`, `from - step`, ... down to `to` inclusive.
    pub fn stepped(from: f64, to: f64, step: f64) -> Result<Self, MissionError> {
        if !(step > 0.0) {
            return Err(MissionError::Invalid("step must be positive".into()));
        }
        let n = ((from - to) / step + 1e-9).floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|k| from - k as f64 * step).collect();
        if (v.last().unwrap() - to).abs() > 1e-9 {
            v.push(to);
        }
        Self::new(v)
    }
}

/// Outcome of one sweep entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub bound_kg: f64,
    pub solution: Option<TransferSolution>,
    pub error: Option<String>,
}

/// Solves `problem` at `to_kg` from `warm`, known to be a solution at
/// `from_kg`. A failed step is retried through the midpoint bound, at most
/// `depth` halvings deep; intermediate solutions are not reported.
fn step_to(
    problem: &TransferProblem,
    warm: &TransferSolution,
    from_kg: f64,
    to_kg: f64,
    depth: usize,
    opts: &SolveOptions,
) -> Result<TransferSolution, MissionError> {
    let p = problem.clone().with_bound_kg(Some(to_kg));
    let first = solve_constrained(&p, warm, opts);
    if matches!(&first, Ok(s) if s.converged) || depth == 0 {
        return first;
    }
    let mid = 0.5 * (from_kg + to_kg);
    log::info!("bound {to_kg} kg from {from_kg} kg failed, stepping through {mid} kg");
    let Ok(half) = step_to(problem, warm, from_kg, mid, depth - 1, opts) else {
        return first;
    };
    if !half.converged {
        return first;
    }
    let mut next = problem.clone();
    next.domains = half.domains.clone();
    step_to(&next, &half, mid, to_kg, depth - 1, opts).or(first)
}

/// Solves each bound of `plan` warm-started from the previous converged
/// solution (the first from `start`). Failures are recorded and skipped.
pub fn continuation_sweep(
    problem: &TransferProblem,
    plan: &ContinuationPlan,
    start: &TransferSolution,
    opts: &SolveOptions,
) -> Vec<SweepEntry> {
    let mut warm = start.clone();
    let mut warm_kg = start.propellant_bound_kg.unwrap_or(start.metrics.mode1_fuel_kg);
    let mut current = problem.clone();
    let mut out = Vec::new();
    for &kg in &plan.bounds_kg {
        match step_to(&current, &warm, warm_kg, kg, opts.continuation_depth, opts) {
            Ok(s) => {
                log::info!("bound {kg} kg: {:.4} days, converged {}", s.metrics.duration_days, s.converged);
                if s.converged {
                    current.domains = s.domains.clone();
                    warm = s.clone();
                    warm_kg = kg;
                }
                out.push(SweepEntry { bound_kg: kg, solution: Some(s), error: None });
            }
            Err(e) => {
                log::warn!("bound {kg} kg failed: {e}");
                out.push(SweepEntry { bound_kg: kg, solution: None, error: Some(e.to_string()) });
            }
        }
    }
    out
}
