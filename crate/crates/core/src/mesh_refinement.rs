//! hp mesh refinement: collocation error estimated against explicit
//! propagation, degree raising or interval splitting, and detection of
//! control discontinuities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Cr3bpModel, Er3bpModel};
use crate::mission::TransferProblem;
use crate::nlp::{self, NlpError, NlpSolution, SolveStatus, SolverOptions};
use crate::propagator::{propagate, PropagatorOptions};
use crate::transcription::{
    phase_solutions, transcribe, Guess, Mesh, PhaseKind, PhaseMesh, PhaseSolution, Transcription,
    TranscriptionError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementOptions {
    pub state_error_tol: f64,
    pub max_iterations: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Extrapolation orders used by the jump detector.
    pub jump_orders: Vec<usize>,
    pub jump_threshold: f64,
    pub bound_safety: f64,
    /// Propagation tolerance for the error estimate.
    pub propagation_tol: f64,
}

impl Default for RefinementOptions {
    fn default() -> Self {
        Self {
            state_error_tol: 1e-6,
            max_iterations: 25,
            n_min: 2,
            n_max: 12,
            jump_orders: (1..=8).collect(),
            jump_threshold: 0.2,
            bound_safety: 1.2,
            propagation_tol: 1e-10,
        }
    }
}

impl RefinementOptions {
    pub fn validate(&self) -> Result<(), RefinementError> {
        let bad = |m: &str| Err(RefinementError::Options(m.to_string()));
        if !(self.state_error_tol > 0.0) {
            return bad("state error tolerance must be positive");
        }
        if self.n_min < 1 || self.n_min > self.n_max || self.n_max > crate::transcription::MAX_DEGREE {
            return bad("degree bounds must satisfy 1 <= n_min <= n_max <= 20");
        }
        if self.jump_orders.is_empty() || self.jump_orders.contains(&0) {
            return bad("jump orders must be positive");
        }
        if !(self.jump_threshold > 0.0) || !(self.bound_safety >= 1.0) {
            return bad("jump threshold must be positive and bound safety at least 1");
        }
        if !(self.propagation_tol > 0.0) {
            return bad("propagation tolerance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RefinementError {
    #[error("invalid refinement options: {0}")]
    Options(String),
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error("NLP did not converge on refinement iteration {iteration}: {status:?}")]
    NotConverged { iteration: usize, status: SolveStatus },
}

/// A control discontinuity in one phase, bracketed by `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub phase: usize,
    /// Control component (3 for mode 1, 4 for mode 2).
    pub component: usize,
    pub nu: f64,
    pub lo: f64,
    pub hi: f64,
    /// Signed change across the jump.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Per phase, per interval max relative state error.
    pub errors: Vec<Vec<f64>>,
    pub max_error: f64,
    pub jumps: Vec<Jump>,
}

impl ErrorReport {
    /// Non-finite errors (failed propagations) are stored as `f64::MAX` so
    /// the report stays representable as text.
    pub fn new(mut errors: Vec<Vec<f64>>, jumps: Vec<Jump>) -> Self {
        for e in errors.iter_mut().flatten() {
            if !e.is_finite() {
                *e = f64::MAX;
            }
        }
        let max_error = errors.iter().flatten().fold(0.0f64, |a, e| a.max(*e));
        Self { errors, max_error, jumps }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_error <= tol
    }
}

/// Max relative error of each interval of `phase`: every interval is
/// propagated from its initial node with the interpolated control and
/// compared against the interpolant on a dense sample.
pub fn estimate_phase_error(problem: &TransferProblem, phase: &PhaseSolution, tol: f64) -> Vec<f64> {
    let dim = phase.states[0].len();
    let mut scale = vec![1.0f64; dim];
    for s in &phase.states {
        for (c, v) in scale.iter_mut().zip(s) {
            *c = (*c).max(1.0 + v.abs());
        }
    }
    let er3bp = Er3bpModel::new(&problem.sys, &problem.sc);
    let cr3bp = Cr3bpModel::new(&problem.sys);
    let opts = PropagatorOptions::with_tol(tol);
    let width = phase.nuf - phase.nu0;
    (0..phase.mesh.num_intervals())
        .into_par_iter()
        .map(|k| {
            let (a, b) = phase.interval_span(k);
            if !(b - a).is_finite() || (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
                return 0.0;
            }
            let y0 = &phase.states[phase.mesh.interval_start(k)];
            let traj = match phase.kind {
                PhaseKind::Transfer(_) => propagate(
                    |nu, y, out| {
                        let u = phase.control_at_fraction((nu - phase.nu0) / width);
                        let x: [f64; 8] = y.try_into().expect("8 states");
                        let u: [f64; 5] = u[..5].try_into().expect("5 controls");
                        out.copy_from_slice(&er3bp.rhs(&x, &u, nu)?);
                        Ok(())
                    },
                    y0,
                    (a, b),
                    &opts,
                ),
                _ => propagate(
                    |_, y, out| {
                        let x: [f64; 7] = y.try_into().expect("7 states");
                        out.copy_from_slice(&cr3bp.rhs(&x)?);
                        Ok(())
                    },
                    y0,
                    (a, b),
                    &opts,
                ),
            };
            let Ok(traj) = traj else {
                return f64::INFINITY;
            };
            let n = phase.mesh.degrees[k];
            let samples = 4 * n + 8;
            let (fa, fb) = (phase.mesh.fractions[k], phase.mesh.fractions[k + 1]);
            let mut err = 0.0f64;
            for j in 0..=samples {
                let s = j as f64 / samples as f64;
                let nu = a + s * (b - a);
                let Ok(p) = traj.eval(nu) else {
                    return f64::INFINITY;
                };
                let c = phase.state_at_fraction(fa + s * (fb - fa));
                for i in 0..dim {
                    let e = (p[i] - c[i]).abs() / scale[i];
                    if !e.is_finite() {
                        return f64::INFINITY;
                    }
                    err = err.max(e);
                }
            }
            err
        })
        .collect()
}

/// Error report over all phases, with jumps detected in the transfer phases.
pub fn estimate_error(problem: &TransferProblem, phases: &[PhaseSolution], opts: &RefinementOptions) -> ErrorReport {
    let errors = phases.iter().map(|p| estimate_phase_error(problem, p, opts.propagation_tol)).collect();
    let jumps = phases
        .iter()
        .enumerate()
        .filter(|(_, p)| p.kind.is_transfer())
        .flat_map(|(i, p)| detect_jumps(p, opts).into_iter().map(move |j| Jump { phase: i, ..j }))
        .collect();
    ErrorReport::new(errors, jumps)
}

/// Value at `x` of the polynomial through `(xs, ys)`.
fn extrapolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != j {
                l *= (x - xk) / (xj - xk);
            }
        }
        acc += l * yj;
    }
    acc
}

/// Jumps in a sampled signal. Samples `i` and `j = i + 1 + skip` bracket a
/// jump candidate when, for every order `R`, the polynomials through up to
/// `R` samples ending at `i` and starting at `j` both miss the sample on the
/// other side by more than `threshold`. Skipping up to two samples catches
/// transitions that pass through intermediate values. Nearby candidates of
/// the same sign are merged and the largest kept; the reported index is the
/// largest single step inside the bracket.
pub fn detect_signal_jumps(xs: &[f64], ys: &[f64], orders: &[usize], threshold: f64) -> Vec<(usize, f64)> {
    let n = xs.len();
    if n < 2 {
        return Vec::new();
    }
    let mut flagged: Vec<(usize, f64)> = Vec::new();
    for skip in 0..=2 {
        for i in 0..n.saturating_sub(1 + skip) {
            let j = i + 1 + skip;
            let mut best = f64::INFINITY;
            for &r in orders {
                let (l0, r1) = (i + 1 - r.min(i + 1), j + r.min(n - j));
                let left = (extrapolate(&xs[l0..=i], &ys[l0..=i], xs[j]) - ys[j]).abs();
                let right = (extrapolate(&xs[j..r1], &ys[j..r1], xs[i]) - ys[i]).abs();
                best = best.min(left.min(right));
            }
            if best.is_finite() && best > threshold {
                let g = (i..j).max_by(|a, b| (ys[a + 1] - ys[*a]).abs().total_cmp(&(ys[b + 1] - ys[*b]).abs())).unwrap();
                flagged.push((g, ys[j] - ys[i]));
            }
        }
    }
    flagged.sort_by_key(|f| f.0);
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (i, d) in flagged {
        match merged.last_mut() {
            Some(last) if i <= last.0 + 3 && d.signum() == last.1.signum() => {
                if d.abs() > last.1.abs() {
                    *last = (i, d);
                }
            }
            _ => merged.push((i, d)),
        }
    }
    merged
}

/// Uniform samples per phase taken by [`detect_jumps`].
pub const JUMP_SAMPLES: usize = 400;

/// Throttle discontinuities of a transfer phase. The control interpolant
/// is sampled on a uniform grid so that transitions resolved by clustered
/// mesh points still show up as jumps.
pub fn detect_jumps(phase: &PhaseSolution, opts: &RefinementOptions) -> Vec<Jump> {
    if phase.controls.is_empty() || phase.controls[0].len() < 5 || !(phase.nuf > phase.nu0) {
        return Vec::new();
    }
    let fr: Vec<f64> = (0..JUMP_SAMPLES).map(|k| (k as f64 + 0.5) / JUMP_SAMPLES as f64).collect();
    let nus: Vec<f64> = fr.iter().map(|s| phase.nu0 + s * (phase.nuf - phase.nu0)).collect();
    let us: Vec<Vec<f64>> = fr.iter().map(|s| phase.control_at_fraction(*s)).collect();
    let mut out = Vec::new();
    for component in [3, 4] {
        let ys: Vec<f64> = us.iter().map(|u| u[component]).collect();
        for (i, size) in detect_signal_jumps(&nus, &ys, &opts.jump_orders, opts.jump_threshold) {
            let (lo, hi) = (nus[i], nus[i + 1]);
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * opts.bound_safety * (hi - lo);
            out.push(Jump { phase: 0, component, nu: mid, lo: mid - half, hi: mid + half, size });
        }
    }
    out.sort_by(|a, b| a.nu.total_cmp(&b.nu));
    out
}

/// Degree increase predicted to bring `error` below `tol` at degree `n`.
fn degree_increase(error: f64, tol: f64, n: usize) -> usize {
    let base = (n.max(2)) as f64;
    ((error / tol).ln() / base.ln()).ceil().max(1.0) as usize
}

/// New mesh for one phase. `jumps` are fractions of the phase span.
pub fn refine_phase(mesh: &PhaseMesh, errors: &[f64], jumps: &[(f64, f64, f64)], opts: &RefinementOptions) -> PhaseMesh {
    let mut fractions = vec![mesh.fractions[0]];
    let mut degrees = Vec::new();
    for (k, &err) in errors.iter().enumerate() {
        let (a, b) = (mesh.fractions[k], mesh.fractions[k + 1]);
        let n = mesh.degrees[k];
        let mut push = |f: f64, d: usize| {
            fractions.push(f);
            degrees.push(d.clamp(opts.n_min, opts.n_max));
        };
        if err <= opts.state_error_tol || b - a <= 0.0 {
            push(b, n);
            continue;
        }
        let margin = 1e-3 * (b - a);
        let inside: Vec<&(f64, f64, f64)> =
            jumps.iter().filter(|j| j.0 > a + margin && j.0 < b - margin).collect();
        if !inside.is_empty() {
            let mut cuts: Vec<f64> = Vec::new();
            for &&(at, lo, hi) in &inside {
                cuts.push(at);
                for edge in [lo, hi] {
                    if edge > a + margin && edge < b - margin {
                        cuts.push(edge);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|x, y| (*x - *y).abs() <= margin);
            for c in cuts {
                push(c, n);
            }
            push(b, n);
            continue;
        }
        let p = degree_increase(err, opts.state_error_tol, n);
        if n.saturating_add(p) <= opts.n_max {
            push(b, n + p);
            continue;
        }
        let ratio = (err / opts.state_error_tol).min(1e12);
        let pieces = ((ratio.powf(1.0 / n as f64)).ceil() as usize + 1).min(4);
        for i in 1..=pieces {
            let f = if i == pieces { b } else { a + (b - a) * i as f64 / pieces as f64 };
            push(f, n);
        }
    }
    PhaseMesh { fractions, degrees }
}

/// Applies [`refine_phase`] to every phase.
pub fn refine(mesh: &Mesh, phases: &[PhaseSolution], report: &ErrorReport, opts: &RefinementOptions) -> Mesh {
    Mesh {
        phases: mesh
            .phases
            .iter()
            .enumerate()
            .map(|(i, pm)| {
                let p = &phases[i];
                let span = p.nuf - p.nu0;
                let jumps: Vec<(f64, f64, f64)> = if span > 0.0 {
                    report
                        .jumps
                        .iter()
                        .filter(|j| j.phase == i)
                        .map(|j| ((j.nu - p.nu0) / span, (j.lo - p.nu0) / span, (j.hi - p.nu0) / span))
                        .collect()
                } else {
                    Vec::new()
                };
                refine_phase(pm, &report.errors[i], &jumps, opts)
            })
            .collect(),
    }
}

/// One solve-and-estimate step of [`refine_loop`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub iteration: usize,
    pub mesh: Mesh,
    pub objective: f64,
    pub nlp_iterations: usize,
    pub status: SolveStatus,
    pub report: ErrorReport,
}

#[derive(Debug, Clone)]
pub struct RefinementOutcome {
    pub transcription: Transcription,
    pub nlp: NlpSolution,
    pub phases: Vec<PhaseSolution>,
    pub statics: [f64; 6],
    pub history: Vec<RefinementStep>,
    /// Error tolerance met on the final mesh.
    pub converged: bool,
}

impl RefinementOutcome {
    pub fn final_report(&self) -> &ErrorReport {
        &self.history.last().expect("at least one step").report
    }
}

/// Solve, estimate, refine until the error tolerance holds or the iteration
/// budget runs out. The first solve uses `solver`; later ones are
/// warm-started from the previous solution with `resolver`.
pub fn refine_loop(
    problem: &TransferProblem,
    initial_mesh: &Mesh,
    guess: &Guess,
    opts: &RefinementOptions,
    solver: &SolverOptions,
    resolver: &SolverOptions,
) -> Result<RefinementOutcome, RefinementError> {
    opts.validate()?;
    let mut mesh = initial_mesh.clone();
    let mut guess = guess.clone();
    let mut history = Vec::new();
    let mut iteration = 0;
    loop {
        let t = transcribe(problem, &mesh, &guess)?;
        let sol = nlp::solve(&t.nlp, &t.z0, if iteration == 0 { solver } else { resolver })?;
        if sol.status != SolveStatus::Optimal {
            return Err(RefinementError::NotConverged { iteration, status: sol.status });
        }
        let phases = phase_solutions(&t.layout, &t.mesh, &sol.z)?;
        let statics = t.layout.unpack(&sol.z)?.statics;
        let report = estimate_error(problem, &phases, opts);
        log::info!(
            "refinement {iteration}: J = {:.9}, max error {:.3e}, {} collocation points",
            sol.objective,
            report.max_error,
            mesh.total_collocation()
        );
        let passes = report.passes(opts.state_error_tol);
        history.push(RefinementStep {
            iteration,
            mesh: mesh.clone(),
            objective: sol.objective,
            nlp_iterations: sol.iterations,
            status: sol.status,
            report: report.clone(),
        });
        if passes || iteration + 1 >= opts.max_iterations {
            return Ok(RefinementOutcome { transcription: t, nlp: sol, phases, statics, history, converged: passes });
        }
        let next = refine(&mesh, &phases, &report, opts);
        guess = Guess::from_solution(&phases, statics);
        mesh = next;
        iteration += 1;
    }
}

/// Refinement history as pretty-printed JSON.
pub fn history_dump(history: &[RefinementStep]) -> String {
    serde_json::to_string_pretty(history).expect("history serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_has_no_jumps() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let ys = vec![0.7; 30];
        assert!(detect_signal_jumps(&xs, &ys, &[1, 2, 3], 0.2).is_empty());
    }

    #[test]
    fn on_off_on_located() {
        let xs: Vec<f64> = (0..60).map(|i| (i as f64 * 0.05).powf(1.1)).collect();
        let (a, b) = (0.9, 2.2);
        let ys: Vec<f64> = xs.iter().map(|x| if *x < a || *x > b { 1.0 } else { 0.0 }).collect();
        let j = detect_signal_jumps(&xs, &ys, &(1..=8).collect::<Vec<_>>(), 0.2);
        assert_eq!(j.len(), 2);
        assert!(xs[j[0].0] < a && xs[j[0].0 + 1] >= a && j[0].1 < 0.0);
        assert!(xs[j[1].0] <= b && xs[j[1].0 + 1] > b && j[1].1 > 0.0);
    }

    #[test]
    fn smooth_polynomials_not_flagged() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        for c in [[0.0, 1.0, 0.0, 0.0], [1.0, -3.0, 2.5, 0.0], [0.0, 4.0, -6.0, 3.0]] {
            let ys: Vec<f64> = xs.iter().map(|x| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x).collect();
            assert!(detect_signal_jumps(&xs, &ys, &(1..=8).collect::<Vec<_>>(), 0.2).is_empty(), "{c:?}");
        }
    }

    #[test]
    fn passing_mesh_unchanged() {
        let m = PhaseMesh { fractions: vec![0.0, 0.3, 1.0], degrees: vec![4, 6] };
        let r = refine_phase(&m, &[1e-8, 5e-7], &[], &RefinementOptions::default());
        assert_eq!(r, m);
    }

    #[test]
    fn smooth_failure_raises_degree() {
        let m = PhaseMesh::uniform(1, 4);
        let r = refine_phase(&m, &[1e-4], &[], &RefinementOptions::default());
        // log(100)/log(4) = 3.32
        assert_eq!(r.fractions, vec![0.0, 1.0]);
        assert_eq!(r.degrees, vec![8]);
    }

    #[test]
    fn large_failure_splits() {
        let m = PhaseMesh::uniform(1, 10);
        let r = refine_phase(&m, &[1e-2], &[], &RefinementOptions::default());
        // 1e4^(1/10) = 2.51, three plus one pieces
        assert_eq!(r.num_intervals(), 4);
        assert!(r.degrees.iter().all(|d| *d == 10));
        assert!((r.fractions[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jump_inside_failing_interval_splits_there() {
        let m = PhaseMesh::uniform(2, 5);
        let r = refine_phase(&m, &[1e-3, 1e-9], &[(0.2, 0.19, 0.21)], &RefinementOptions::default());
        assert_eq!(r.fractions, vec![0.0, 0.19, 0.2, 0.21, 0.5, 1.0]);
        assert!(r.degrees.iter().all(|d| *d == 5));
    }

    #[test]
    fn degrees_stay_within_bounds() {
        let opts = RefinementOptions::default();
        let m = PhaseMesh { fractions: vec![0.0, 0.5, 1.0], degrees: vec![12, 2] };
        let r = refine_phase(&m, &[f64::INFINITY, 0.5], &[], &opts);
        assert!(r.degrees.iter().all(|d| (opts.n_min..=opts.n_max).contains(d)));
        assert!(r.fractions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn report_max_over_entries() {
        let r = ErrorReport::new(vec![vec![1e-7, 3e-6], vec![], vec![2e-6]], vec![]);
        assert_eq!(r.max_error, 3e-6);
        assert!(!r.passes(1e-6));
    }
}
