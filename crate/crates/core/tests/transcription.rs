use mmt::dynamics::{pulsating_to_circular, Cr3bpModel, SpacecraftParams, SystemParams};
use mmt::mission::{
    free_domain, stacked_guess, three_domain_template, ModeSelection, StackingOptions, TransferProblem,
};
use mmt::nlp::probe_sparsity;
use mmt::nlp::{self, NlpProblem, SolveStatus, SolverOptions};
use mmt::orbits::{lookup, L2_SOUTHERN_HALO, NRHO};
use mmt::propagator::{propagate, PropagatorOptions};
use mmt::transcription::{
    phase_solutions, transcribe, DecisionLayout, Guess, Mesh, PhaseGuess, PhaseHistory, PhaseMesh, PhaseTable, Tag,
};
use proptest::prelude::*;

fn problem(sel: ModeSelection) -> TransferProblem {
    TransferProblem::unconstrained(
        SystemParams::earth_moon(),
        SpacecraftParams::case1(),
        lookup(L2_SOUTHERN_HALO).unwrap(),
        lookup(NRHO).unwrap(),
        sel,
    )
}

fn values(t: &mmt::transcription::Transcription, z: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; t.nlp.num_constraints()];
    NlpProblem::constraints(&t.nlp, z, &mut g).unwrap();
    g
}

#[test]
fn decision_length_matches_hand_count() {
    let p = problem(ModeSelection::OnlyMode1).with_bound_kg(Some(40.0));
    let mesh = Mesh {
        phases: vec![
            PhaseMesh { fractions: vec![0.0, 0.2, 0.5, 1.0], degrees: vec![3, 4, 5] },
            PhaseMesh { fractions: vec![0.0, 0.5, 1.0], degrees: vec![2, 6] },
            PhaseMesh { fractions: vec![0.0, 1.0], degrees: vec![4] },
        ],
    };
    let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
    let t = transcribe(&p, &mesh, &guess).unwrap();
    // coast: 13 nodes x 7 + 2; transfer: 9 x 8 + 8 x 5 + 2; coast: 5 x 7 + 2;
    // 6 statics; 1 integral
    assert_eq!(t.nlp.num_variables(), 93 + 114 + 37 + 6 + 1);
    assert_eq!(t.layout.len, 251);
    // 12 x 7 + 8 x 8 + 4 x 7 defect rows
    assert_eq!(t.nlp.constraints.rows_tagged(Tag::Defect).len(), 176);
    let (lo, hi) = t.nlp.variable_bounds();
    assert_eq!(lo.len(), 251);
    assert_eq!(hi.len(), 251);
    let (cl, cu) = t.nlp.constraint_bounds();
    assert_eq!(cl.len(), t.nlp.num_constraints());
    assert_eq!(cu.len(), t.nlp.constraints.rows.len());

    // the propellant integral exists whenever mode 1 can fire
    let unbounded = transcribe(&problem(ModeSelection::OnlyMode1), &mesh, &guess).unwrap();
    assert_eq!(unbounded.nlp.num_variables(), 251);
    let p2 = problem(ModeSelection::OnlyMode2);
    let g2 = stacked_guess(&p2, &StackingOptions::default()).unwrap();
    assert_eq!(transcribe(&p2, &mesh, &g2).unwrap().nlp.num_variables(), 250);
}

#[test]
fn every_problem_condition_has_a_row_or_bound() {
    let mut p = problem(ModeSelection::MultiMode).with_bound_kg(Some(30.0));
    p.domains = vec![free_domain(ModeSelection::MultiMode)];
    let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
    let t = transcribe(&p, &Mesh::uniform(3, 3, 3), &guess).unwrap();
    let covered = t.nlp.constraints.coverage();
    for tag in Tag::PROBLEM {
        assert!(covered.contains(&tag), "{tag:?} missing");
    }

    p.domains = three_domain_template(ModeSelection::MultiMode);
    let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
    let t = transcribe(&p, &Mesh::uniform(5, 3, 3), &guess).unwrap();
    let covered = t.nlp.constraints.coverage();
    assert!(covered.contains(&Tag::DomainContinuity));
    assert!(covered.contains(&Tag::ThrottleStructure));
    // fixed throttles make the bilinear row redundant
    assert!(!covered.contains(&Tag::Complementarity));
}

#[test]
fn stacked_guess_violates_only_dynamics_rows() {
    let p = problem(ModeSelection::OnlyMode1);
    let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
    let mut coast_defect = Vec::new();
    for intervals in [10, 40] {
        let t = transcribe(&p, &Mesh::uniform(3, intervals, 4), &guess).unwrap();
        let g = values(&t, &t.z0);
        let mut worst_coast = 0.0f64;
        for (i, v) in g.iter().enumerate() {
            assert!(v.is_finite());
            let row = &t.nlp.constraints.rows[i];
            let viol = t.nlp.constraints.violation(i, *v);
            if row.tag == Tag::Defect {
                if row.phase != Some(1) {
                    worst_coast = worst_coast.max(viol);
                }
            } else {
                assert!(viol < 1e-12, "{:?} row {i}: {viol}", row.tag);
            }
        }
        coast_defect.push(worst_coast);
    }
    // coast defects are discretization error of a ballistic arc
    assert!(coast_defect[1] < 0.1 * coast_defect[0], "{coast_defect:?}");
}

/// Initial-coast defects at samples of a tightly propagated arc, on a
/// single interval of degree `n`.
fn coast_defect_norm(n: usize) -> f64 {
    let p = problem(ModeSelection::OnlyMode1);
    let mut guess = stacked_guess(&p, &StackingOptions { departure_fraction: 0.15, ..StackingOptions::default() }).unwrap();
    let (a, b) = (guess.phases[0].nu0, guess.phases[0].nuf);
    let x0 = guess.phases[0].state(0.0);
    let model = Cr3bpModel::new(&p.sys);
    let traj = propagate(
        |_, y, out| {
            let x: [f64; 7] = y.try_into().unwrap();
            out.copy_from_slice(&model.rhs(&x)?);
            Ok(())
        },
        &x0,
        (a, b),
        &PropagatorOptions::with_tol(1e-12),
    )
    .unwrap();
    let pm = PhaseMesh::uniform(1, n);
    let fractions = pm.node_fractions();
    let states = fractions.iter().map(|s| traj.eval(a + s * (b - a)).unwrap()).collect();
    guess.phases[0] =
        PhaseGuess { nu0: a, nuf: b, history: PhaseHistory::Table(PhaseTable { fractions, states, controls: Vec::new() }) };
    let mesh = Mesh { phases: vec![pm, PhaseMesh::uniform(4, 4), PhaseMesh::uniform(4, 4)] };
    let t = transcribe(&p, &mesh, &guess).unwrap();
    let g = values(&t, &t.z0);
    t.nlp
        .constraints
        .rows
        .iter()
        .zip(&g)
        .filter(|(r, _)| r.tag == Tag::Defect && r.phase == Some(0))
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn coast_defects_converge_spectrally() {
    let norms: Vec<f64> = (3..=10).map(coast_defect_norm).collect();
    for w in norms.windows(2) {
        assert!(w[1] < w[0], "{norms:?}");
    }
    assert!(norms[7] < 1e-4 * norms[0], "{norms:?}");
}

#[test]
fn declared_sparsity_covers_every_dependency() {
    for sel in [ModeSelection::OnlyMode1, ModeSelection::MultiMode] {
        let mut p = problem(sel).with_bound_kg(Some(30.0));
        p.domains = three_domain_template(sel);
        let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
        let t = transcribe(&p, &Mesh::uniform(5, 2, 3), &guess).unwrap();
        let r = probe_sparsity(&t.nlp, &t.z0, 10, 1e-3, 7).unwrap();
        assert!(r.undeclared.is_empty(), "{sel:?}: {:?}", r.undeclared);
        assert!(r.max_jacobian_error < 1e-6, "{sel:?}: {r:?}");
        assert!(r.max_gradient_error < 1e-6, "{sel:?}: {r:?}");
    }
}

#[test]
fn coast_defect_jacobian_matches_differences_at_guess() {
    let p = problem(ModeSelection::OnlyMode1);
    let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
    let t = transcribe(&p, &Mesh::uniform(3, 3, 4), &guess).unwrap();
    let structure = t.nlp.jacobian_structure();
    let mut jac = vec![0.0; structure.len()];
    t.nlp.jacobian_values(&t.z0, &mut jac).unwrap();
    let rows: std::collections::BTreeSet<usize> = t
        .nlp
        .constraints
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.tag == Tag::Defect && r.phase == Some(0))
        .map(|(i, _)| i)
        .collect();
    let mut z = t.z0.clone();
    let mut checked = 0;
    for (k, &(i, j)) in structure.iter().enumerate() {
        if !rows.contains(&i) {
            continue;
        }
        let h = 1e-6 * (1.0 + z[j].abs());
        let x = z[j];
        z[j] = x + h;
        let gp = values(&t, &z)[i];
        z[j] = x - h;
        let gm = values(&t, &z)[i];
        z[j] = x;
        let fd = (gp - gm) / (2.0 * h);
        assert!((jac[k] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "({i}, {j}): {} vs {fd}", jac[k]);
        checked += 1;
    }
    assert!(checked > 100);
}

/// Coarse single-start solve; the point only has to be feasible.
fn solved() -> (TransferProblem, mmt::transcription::Transcription, Vec<f64>) {
    let p = problem(ModeSelection::OnlyMode1);
    let guess = stacked_guess(&p, &StackingOptions::default()).unwrap();
    let t = transcribe(&p, &Mesh::uniform(3, 10, 4), &guess).unwrap();
    let sol = nlp::solve(&t.nlp, &t.z0, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    (p, t, sol.z)
}

#[test]
fn solved_point_is_feasible_and_links_agree() {
    let (p, t, z) = solved();
    assert!(t.nlp.max_violation(&z).unwrap() <= 1e-8);
    let phases = phase_solutions(&t.layout, &t.mesh, &z).unwrap();
    let e = p.sys.eccentricity;
    for (coast, transfer, coast_end) in [(&phases[0], &phases[1], true), (&phases[2], &phases[1], false)] {
        let (c, x, nu) = if coast_end {
            (coast.states.last().unwrap(), &transfer.states[0], transfer.nu0)
        } else {
            (&coast.states[0], transfer.states.last().unwrap(), transfer.nuf)
        };
        // pulsating lengths scale by (1 - e^2) / (1 + e cos nu)
        let gamma = (1.0 - e * e) / (1.0 + e * nu.cos());
        for i in 0..3 {
            assert!((gamma * x[i] - c[i]).abs() < 1e-8, "position {i}: {} vs {}", gamma * x[i], c[i]);
        }
        let circ = pulsating_to_circular(&p.sys, nu, &x[..6].try_into().unwrap());
        for i in 3..6 {
            assert!((circ[i] - c[i]).abs() < 1e-8, "velocity {i}");
        }
        assert!((x[6] - c[6]).abs() < 1e-8, "tau");
    }
    assert!((phases[0].nuf - phases[1].nu0).abs() < 1e-8);
    assert!((phases[1].nuf - phases[2].nu0).abs() < 1e-8);
}

#[test]
fn solved_interval_midpoints_match_propagation() {
    let (p, t, z) = solved();
    let phases = phase_solutions(&t.layout, &t.mesh, &z).unwrap();
    let coast = &phases[0];
    let model = Cr3bpModel::new(&p.sys);
    for k in 0..coast.mesh.num_intervals() {
        let (a, b) = coast.interval_span(k);
        let x0 = &coast.states[coast.mesh.interval_start(k)];
        let traj = propagate(
            |_, y, out| {
                let x: [f64; 7] = y.try_into().unwrap();
                out.copy_from_slice(&model.rhs(&x)?);
                Ok(())
            },
            x0,
            (a, b),
            &PropagatorOptions::with_tol(1e-12),
        )
        .unwrap();
        let mid = 0.5 * (a + b);
        let want = traj.eval(mid).unwrap();
        let got = coast.state_at(mid).unwrap();
        // coarse mesh: the refinement tolerance is not met yet, but the
        // midpoints are still close
        for i in 0..6 {
            assert!((want[i] - got[i]).abs() < 1e-3, "interval {k} component {i}");
        }
    }
}

fn mesh_strategy() -> impl Strategy<Value = (Mesh, usize, bool)> {
    (1usize..=3, any::<bool>()).prop_flat_map(|(domains, integral)| {
        prop::collection::vec(prop::collection::vec(2usize..=12, 1..=4), domains + 2).prop_map(move |degs| {
            let phases = degs
                .into_iter()
                .map(|d| {
                    let n = d.len();
                    PhaseMesh { fractions: (0..=n).map(|k| k as f64 / n as f64).collect(), degrees: d }
                })
                .collect();
            (Mesh { phases }, domains, integral)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pack_inverts_unpack((mesh, domains, integral) in mesh_strategy(), seed in any::<u64>()) {
        let layout = DecisionLayout::new(&mesh, domains, integral).unwrap();
        let z: Vec<f64> = (0..layout.len).map(|i| ((i as u64).wrapping_mul(6364136223846793005).wrapping_add(seed) >> 11) as f64 * 1e-10).collect();
        let back = layout.pack(&layout.unpack(&z).unwrap()).unwrap();
        prop_assert_eq!(back, z);
    }

    #[test]
    fn guess_from_solution_reproduces_nodes((mesh, domains, _i) in mesh_strategy()) {
        let layout = DecisionLayout::new(&mesh, domains, false).unwrap();
        let z: Vec<f64> = (0..layout.len).map(|i| (i as f64 * 0.37).sin()).collect();
        let phases = phase_solutions(&layout, &mesh, &z).unwrap();
        let g = Guess::from_solution(&phases, [0.0; 6]);
        for (p, ph) in phases.iter().enumerate() {
            for (k, s) in ph.mesh.node_fractions().iter().enumerate() {
                let x = g.phases[p].state(*s);
                for (a, b) in x.iter().zip(&ph.states[k]) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }
}
