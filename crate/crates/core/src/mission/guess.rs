//! Initial guesses from trajectory stacking.

use serde::{Deserialize, Serialize};

use super::problem::{ModeSelection, TransferProblem};
use crate::dynamics::{circular_to_pulsating, mass_flow};
use crate::orbits::{stacking_guess, OrbitError};
use crate::propagator::PropagatorOptions;
use crate::transcription::{
    anomaly_to_pair, fraction_to_pair, Guess, PhaseGuess, PhaseHistory, PhaseTable,
};

/// Where the stacked history is cut into coast, transfer and coast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackingOptions {
    /// Revolutions stacked on each orbit.
    pub periods: usize,
    /// Fraction of the initial orbit's period coasted before departure.
    pub departure_fraction: f64,
    /// Fraction of the terminal orbit's period coasted after arrival.
    pub arrival_fraction: f64,
    /// True anomaly at the start of the initial coast [rad].
    pub initial_anomaly: f64,
    /// Throttle on the transfer (mode 2 when only mode 2 is selected);
    /// reduced if the guess would run dry.
    pub throttle: f64,
    /// Table samples per phase.
    pub samples: usize,
}

impl Default for StackingOptions {
    fn default() -> Self {
        Self {
            periods: 1,
            departure_fraction: 0.5,
            arrival_fraction: 0.5,
            initial_anomaly: 0.0,
            throttle: 1.0,
            samples: 2000,
        }
    }
}

/// Guess for a single-domain problem: the initial orbit stacked forward and
/// the terminal orbit stacked backward, patched inside the transfer.
pub fn stacked_guess(problem: &TransferProblem, opts: &StackingOptions) -> Result<Guess, OrbitError> {
    let sys = problem.sys;
    let prop = PropagatorOptions::default();
    let st = stacking_guess(&sys, &problem.initial_orbit, &problem.terminal_orbit, opts.periods, opts.throttle, &prop)?;
    let f0 = opts.departure_fraction.clamp(0.0, 1.0);
    let ff = opts.arrival_fraction.clamp(0.0, 1.0);
    let (p0, pf) = (problem.initial_orbit.period, problem.terminal_orbit.period);
    let t1 = f0 * p0;
    let t2 = st.total_time - ff * pf;
    let ns = opts.samples.max(2);
    let nu_start = opts.initial_anomaly;

    let coast = |a: f64, b: f64| -> PhaseGuess {
        let fr: Vec<f64> = (0..ns).map(|k| k as f64 / (ns - 1) as f64).collect();
        let states = fr.iter().map(|s| st.state_at(a + s * (b - a)).to_vec()).collect();
        PhaseGuess {
            nu0: nu_start + a,
            nuf: nu_start + b,
            history: PhaseHistory::Table(PhaseTable { fractions: fr, states, controls: Vec::new() }),
        }
    };

    // transfer samples, both sides of the patch epoch when it falls inside
    let mut ts: Vec<f64> = (0..ns).map(|k| t1 + (t2 - t1) * k as f64 / (ns - 1) as f64).collect();
    let patch = st.patch_time;
    let split = ts.partition_point(|t| *t < patch);
    if patch > t1 && patch < t2 {
        ts.insert(split, patch);
        ts.insert(split + 1, patch);
    }
    let duration = (t2 - t1).max(0.0);
    let mode = usize::from(problem.mode_selection == ModeSelection::OnlyMode2);
    let flow = |d: f64, nu: f64| {
        let mut th = [0.0; 2];
        th[mode] = d;
        -mass_flow(&sys, &problem.sc, th[0], th[1], nu)
    };
    let full = flow(1.0, 0.0);
    let throttle = if full * duration > 0.5 { 0.5 / (full * duration) } else { 1.0 }.min(opts.throttle.clamp(0.0, 1.0));
    let mut states = Vec::with_capacity(ts.len());
    let mut controls = Vec::with_capacity(ts.len());
    let mut mass = 1.0;
    for (i, &t) in ts.iter().enumerate() {
        let s = if patch > t1 && patch < t2 && i == split + 1 {
            // right side of the patch
            let e = st.terminal_arc.eval(t - st.total_time).expect("inside terminal arc");
            [e[0], e[1], e[2], e[3], e[4], e[5], st.state_at(t)[6]]
        } else {
            st.state_at(t)
        };
        let nu = nu_start + t;
        if i > 0 {
            let h = t - ts[i - 1];
            mass -= h * flow(throttle, nu);
        }
        let p = circular_to_pulsating(&sys, nu, &[s[0], s[1], s[2], s[3], s[4], s[5]]);
        let v = (p[3] * p[3] + p[4] * p[4] + p[5] * p[5]).sqrt().max(1e-12);
        states.push(vec![p[0], p[1], p[2], p[3], p[4], p[5], s[6], mass]);
        let mut u = vec![p[3] / v, p[4] / v, p[5] / v, 0.0, 0.0];
        u[3 + mode] = throttle;
        controls.push(u);
    }
    let fractions = ts.iter().map(|t| if duration > 0.0 { (t - t1) / duration } else { 0.0 }).collect();
    let transfer = PhaseGuess {
        nu0: nu_start + t1,
        nuf: nu_start + t2,
        history: PhaseHistory::Table(PhaseTable { fractions, states, controls }),
    };

    let (c0, s0) = fraction_to_pair(f0);
    let (cf, sf) = fraction_to_pair(ff);
    let (cn, sn) = anomaly_to_pair(nu_start);
    let mut phases = vec![coast(0.0, t1)];
    phases.extend(std::iter::repeat_n(transfer, problem.domains.len()));
    phases.push(coast(t2, st.total_time));
    Ok(Guess { phases, statics: [c0, s0, cf, sf, cn, sn] })
}
