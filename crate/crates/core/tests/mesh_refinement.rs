use mmt::dynamics::{Cr3bpModel, SpacecraftParams, SystemParams};
use mmt::mesh_refinement::{
    detect_signal_jumps, estimate_error, estimate_phase_error, refine_loop, refine_phase, RefinementOptions,
};
use mmt::mission::{stacked_guess, ModeSelection, StackingOptions, TransferProblem};
use mmt::nlp::SolverOptions;
use mmt::orbits::{lookup, L2_SOUTHERN_HALO, NRHO};
use mmt::propagator::{propagate, PropagatorOptions};
use mmt::transcription::{Mesh, PhaseKind, PhaseMesh, PhaseSolution};
use proptest::prelude::*;

fn problem() -> TransferProblem {
    TransferProblem::unconstrained(
        SystemParams::earth_moon(),
        SpacecraftParams::case1(),
        lookup(L2_SOUTHERN_HALO).unwrap(),
        lookup(NRHO).unwrap(),
        ModeSelection::OnlyMode1,
    )
}

/// A quarter of the halo orbit sampled exactly at the nodes of `mesh`.
fn halo_coast(mesh: PhaseMesh) -> PhaseSolution {
    let p = problem();
    let orbit = &p.initial_orbit;
    let model = Cr3bpModel::new(&p.sys);
    let mut x0 = orbit.defining_state.to_vec();
    x0.push(0.0);
    let span = (0.0, 0.25 * orbit.period);
    let traj = propagate(
        |_, y, out| {
            out.copy_from_slice(&model.rhs(&<[f64; 7]>::try_from(y).unwrap())?);
            Ok(())
        },
        &x0,
        span,
        &PropagatorOptions::with_tol(1e-13),
    )
    .unwrap();
    let states = mesh.node_fractions().iter().map(|s| traj.eval(s * span.1).unwrap()).collect();
    let controls = vec![Vec::new(); mesh.num_collocation()];
    PhaseSolution { kind: PhaseKind::InitialCoast, mesh, nu0: span.0, nuf: span.1, states, controls }
}

#[test]
fn coarse_coast_error_is_large_and_refined_coast_passes() {
    let p = problem();
    let coarse = estimate_phase_error(&p, &halo_coast(PhaseMesh::uniform(1, 2)), 1e-10);
    assert_eq!(coarse.len(), 1);
    assert!(coarse[0] > 1e-3, "{coarse:?}");
    let fine = estimate_phase_error(&p, &halo_coast(PhaseMesh::uniform(4, 10)), 1e-10);
    assert!(fine.iter().all(|e| *e < 1e-6), "{fine:?}");
}

#[test]
fn refining_the_coarse_coast_lowers_its_error() {
    let p = problem();
    let opts = RefinementOptions::default();
    let mut mesh = PhaseMesh::uniform(1, 2);
    let mut last = f64::INFINITY;
    for _ in 0..6 {
        let errs = estimate_phase_error(&p, &halo_coast(mesh.clone()), opts.propagation_tol);
        let worst = errs.iter().fold(0.0f64, |a, e| a.max(*e));
        assert!(worst < last, "{worst} after {last}");
        if worst <= opts.state_error_tol {
            return;
        }
        last = worst;
        mesh = refine_phase(&mesh, &errs, &[], &opts);
    }
    panic!("coast still above tolerance: {last}");
}

fn warm() -> SolverOptions {
    SolverOptions { initial_barrier: 1e-4, bound_push: 1e-6, max_iterations: 1000, ..SolverOptions::default() }
}

#[test]
fn baseline_refinement_converges_and_catches_edits() {
    let p = problem();
    let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
    let opts = RefinementOptions::default();
    let out = refine_loop(&p, &Mesh::uniform(3, 10, 4), &guess, &opts, &SolverOptions::default(), &warm()).unwrap();
    assert!(out.converged);
    assert!(out.history.len() <= 8, "{} iterations", out.history.len());

    let report = estimate_error(&p, &out.phases, &opts);
    assert!(report.passes(1e-6));
    let mut phases = out.phases.clone();
    let k = phases[1].mesh.interval_start(3) + 1;
    phases[1].states[k][0] += 1e-4;
    let edited = estimate_error(&p, &phases, &opts);
    assert!(edited.errors[1][3] > 1e-6, "{:?}", edited.errors[1]);
    for (i, e) in edited.errors[0].iter().chain(&edited.errors[2]).enumerate() {
        assert!(*e <= 1e-6, "untouched interval {i}: {e}");
    }
}

#[test]
fn error_histories_mostly_decrease() {
    let p = problem();
    let opts = RefinementOptions::default();
    let (mut steps, mut falls) = (0, 0);
    for (departure_fraction, arrival_fraction) in [(0.5, 0.5), (0.3, 0.5), (0.5, 0.1), (0.7, 0.9)] {
        let st = StackingOptions { departure_fraction, arrival_fraction, ..StackingOptions::default() };
        let guess = stacked_guess(&p, &st).unwrap();
        let Ok(out) = refine_loop(&p, &Mesh::uniform(3, 10, 4), &guess, &opts, &SolverOptions::default(), &warm()) else {
            continue;
        };
        let errs: Vec<f64> = out.history.iter().map(|h| h.report.max_error).collect();
        steps += errs.len().saturating_sub(1);
        falls += errs.windows(2).filter(|w| w[1] <= w[0]).count();
    }
    assert!(steps >= 8, "only {steps} steps");
    assert!(falls as f64 >= 0.8 * steps as f64, "{falls} of {steps}");
}

fn mesh_and_errors() -> impl Strategy<Value = (PhaseMesh, Vec<f64>)> {
    prop::collection::vec((0.05f64..1.0, 2usize..=12, -10.0f64..2.0), 1..8).prop_map(|v| {
        let total: f64 = v.iter().map(|t| t.0).sum();
        let mut fractions = vec![0.0];
        let mut acc = 0.0;
        for t in &v {
            acc += t.0 / total;
            fractions.push(acc);
        }
        *fractions.last_mut().unwrap() = 1.0;
        let degrees = v.iter().map(|t| t.1).collect();
        let errors = v.iter().map(|t| 10f64.powf(t.2)).collect();
        (PhaseMesh { fractions, degrees }, errors)
    })
}

proptest! {
    #[test]
    fn refined_meshes_stay_valid((mesh, errors) in mesh_and_errors(), jump in prop::option::of(0.0f64..1.0)) {
        let opts = RefinementOptions::default();
        let jumps: Vec<(f64, f64, f64)> = jump.into_iter().map(|j| (j, (j - 0.01).max(0.0), (j + 0.01).min(1.0))).collect();
        let next = refine_phase(&mesh, &errors, &jumps, &opts);
        prop_assert_eq!(next.fractions[0], 0.0);
        prop_assert_eq!(*next.fractions.last().unwrap(), 1.0);
        prop_assert!(next.fractions.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(next.degrees.len() + 1, next.fractions.len());
        prop_assert!(next.degrees.iter().all(|d| (opts.n_min..=opts.n_max).contains(d)));
        prop_assert!(next.validate(opts.n_min, opts.n_max).is_ok());
        // passing intervals survive unchanged
        for k in 0..errors.len() {
            if errors[k] <= opts.state_error_tol {
                let (a, b) = (mesh.fractions[k], mesh.fractions[k + 1]);
                let i = next.fractions.iter().position(|f| *f == a).unwrap();
                prop_assert_eq!(next.fractions[i + 1], b);
                prop_assert_eq!(next.degrees[i], mesh.degrees[k]);
            }
        }
    }

    #[test]
    fn smooth_polynomials_have_no_jumps(c in prop::collection::vec(-1.0f64..1.0, 1..5)) {
        let xs: Vec<f64> = (0..400).map(|k| (k as f64 + 0.5) / 400.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c.iter().rev().fold(0.0, |a, ci| a * x + ci)).collect();
        let opts = RefinementOptions::default();
        prop_assert!(detect_signal_jumps(&xs, &ys, &opts.jump_orders, opts.jump_threshold).is_empty());
    }

    #[test]
    fn steps_are_found(at in 20usize..380, size in 0.3f64..1.0, base in 0.0f64..0.5) {
        let xs: Vec<f64> = (0..400).map(|k| k as f64 / 400.0).collect();
        let ys: Vec<f64> = (0..400).map(|k| if k <= at { base } else { base + size }).collect();
        let opts = RefinementOptions::default();
        let found = detect_signal_jumps(&xs, &ys, &opts.jump_orders, opts.jump_threshold);
        prop_assert_eq!(found.len(), 1);
        prop_assert_eq!(found[0].0, at);
        prop_assert!((found[0].1 - size).abs() < 1e-12);
    }
}
