//! Target periodic orbits and the trajectory-stacking initial guess.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{char_time, jacobi_constant, Cr3bpModel, DynamicsError, SystemParams};
use crate::propagator::{propagate, DenseTrajectory, PropagationError, PropagatorOptions};

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("cannot parse {field} = {value:?}")]
    Parse { field: &'static str, value: String },
    #[error("orbit {0:?} is not in the catalog")]
    Unknown(String),
    #[error("fraction {0} outside [0, 1]")]
    Fraction(f64),
    #[error("n_periods_each must be at least 1")]
    Periods,
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Decimal-string form of an orbit, as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitRecord {
    pub label: String,
    /// `x, y, z, vx, vy, vz` [LU, LU/TU].
    pub state: [String; 6],
    pub jacobi: String,
    /// Period [TU].
    pub period: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub label: String,
    pub defining_state: [f64; 6],
    pub jacobi: f64,
    pub period: f64,
    record: OrbitRecord,
}

fn parse(field: &'static str, s: &str) -> Result<f64, OrbitError> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| OrbitError::Parse {
        field,
        value: s.to_string(),
    })
}

impl PeriodicOrbit {
    pub fn from_record(record: OrbitRecord) -> Result<Self, OrbitError> {
        const NAMES: [&str; 6] = ["x", "y", "z", "vx", "vy", "vz"];
        let mut defining_state = [0.0; 6];
        for i in 0..6 {
            defining_state[i] = parse(NAMES[i], &record.state[i])?;
        }
        let period = parse("period", &record.period)?;
        if !(period > 0.0) {
            return Err(OrbitError::Parse { field: "period", value: record.period.clone() });
        }
        Ok(Self {
            label: record.label.clone(),
            defining_state,
            jacobi: parse("jacobi", &record.jacobi)?,
            period,
            record,
        })
    }

    pub fn record(&self) -> &OrbitRecord {
        &self.record
    }

    /// Period in days for the given system.
    pub fn period_days(&self, sys: &SystemParams) -> f64 {
        self.period / sys.mean_motion() / 86400.0
    }
}

fn rec(label: &str, state: [&str; 6], jacobi: &str, period: &str) -> OrbitRecord {
    OrbitRecord {
        label: label.into(),
        state: state.map(String::from),
        jacobi: jacobi.into(),
        period: period.into(),
    }
}

pub const L2_SOUTHERN_HALO: &str = "l2-southern-halo";
pub const NRHO: &str = "nrho";

/// The two built-in Earth-Moon targets.
pub fn catalog() -> Vec<PeriodicOrbit> {
    [
        rec(
            L2_SOUTHERN_HALO,
            [
                "1.1692032436399828e+0",
                "9.0895948914056935e-30",
                "-9.7343078972773986e-2",
                "-1.2120988489044185e-15",
                "-1.9424148423494397e-1",
                "1.1582044638613824e-15",
            ],
            "3.1141257613953099e+0",
            "3.3325377871055926e+0",
        ),
        rec(
            NRHO,
            [
                "9.1929792455210269e-1",
                "-7.8475765128918404e-29",
                "-2.1213093403317357e-1",
                "-2.1943176228275019e-13",
                "1.3779559700236524e-1",
                "-1.1031515999570366e-12",
            ],
            "3.0032754028672501e+0",
            "1.8077163954358124e+0",
        ),
    ]
    .into_iter()
    .map(|r| PeriodicOrbit::from_record(r).expect("built-in orbit parses"))
    .collect()
}

pub fn lookup(label: &str) -> Result<PeriodicOrbit, OrbitError> {
    catalog().into_iter().find(|o| o.label == label).ok_or_else(|| OrbitError::Unknown(label.into()))
}

/// Parses a JSON list of [`OrbitRecord`]s.
pub fn orbits_from_json(text: &str) -> Result<Vec<PeriodicOrbit>, OrbitError> {
    let recs: Vec<OrbitRecord> = serde_json::from_str(text)?;
    recs.into_iter().map(PeriodicOrbit::from_record).collect()
}

fn cr3bp_fn(sys: &SystemParams) -> impl Fn(f64, &[f64], &mut [f64]) -> Result<(), DynamicsError> {
    let model = Cr3bpModel::new(sys);
    move |_t, y, out| {
        let d = model.rhs6(y.try_into().expect("6-component state"))?;
        out.copy_from_slice(&d);
        Ok(())
    }
}

/// Ballistic propagation of a 6-component circular-model state over `span` [TU].
pub fn propagate_cr3bp(
    sys: &SystemParams,
    y0: &[f64; 6],
    span: (f64, f64),
    opts: &PropagatorOptions,
) -> Result<DenseTrajectory, PropagationError> {
    propagate(cr3bp_fn(sys), y0, span, opts)
}

/// State reached after coasting for `fraction` of the period.
pub fn sample_orbit(
    sys: &SystemParams,
    orbit: &PeriodicOrbit,
    fraction: f64,
    opts: &PropagatorOptions,
) -> Result<[f64; 6], OrbitError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(OrbitError::Fraction(fraction));
    }
    if fraction == 0.0 {
        return Ok(orbit.defining_state);
    }
    let tr = propagate_cr3bp(sys, &orbit.defining_state, (0.0, fraction * orbit.period), opts)?;
    Ok(tr.last().try_into().unwrap())
}

/// Per-component closure residual after one period and the Jacobi mismatch.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitCheck {
    pub label: String,
    pub jacobi_relative_error: f64,
    pub closure: [f64; 6],
}

impl OrbitCheck {
    pub fn max_closure(&self) -> f64 {
        self.closure.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

pub fn check_orbit(
    sys: &SystemParams,
    orbit: &PeriodicOrbit,
    opts: &PropagatorOptions,
) -> Result<OrbitCheck, OrbitError> {
    let j = jacobi_constant(sys, &orbit.defining_state)?;
    let end = sample_orbit(sys, orbit, 1.0, opts)?;
    let mut closure = [0.0; 6];
    for i in 0..6 {
        closure[i] = end[i] - orbit.defining_state[i];
    }
    Ok(OrbitCheck {
        label: orbit.label.clone(),
        jacobi_relative_error: ((j - orbit.jacobi) / orbit.jacobi).abs(),
        closure,
    })
}

/// Initial orbit stacked forward and terminal orbit stacked backward, joined
/// at a single patch point. Time is in circular-model units [TU]; `tau` uses
/// the normalized-time scale of the elliptic system.
#[derive(Debug, Clone)]
pub struct StackedGuess {
    /// Time samples [TU], strictly increasing except for the repeated patch epoch.
    pub nu_grid: Vec<f64>,
    /// `[x, y, z, vx, vy, vz, tau]` at each sample.
    pub state_grid: Vec<[f64; 7]>,
    /// `[ux, uy, uz, delta1, delta2]` at each sample.
    pub control_grid: Vec<[f64; 5]>,
    /// Index of the first terminal-side sample; the sample before it is the
    /// last initial-side one and both share the patch epoch.
    pub discontinuity_location: usize,
    pub initial_arc: DenseTrajectory,
    /// Terminal orbit propagated backward, grid shifted so it starts at the patch epoch.
    pub terminal_arc: DenseTrajectory,
    pub patch_time: f64,
    pub total_time: f64,
    tau_rate: f64,
    throttle: f64,
}

impl StackedGuess {
    /// Circular-model state and `tau` at time `t` [TU]. The patch epoch
    /// belongs to the initial side.
    pub fn state_at(&self, t: f64) -> [f64; 7] {
        let t = t.clamp(0.0, self.total_time);
        let s = if t <= self.patch_time {
            self.initial_arc.eval(t).expect("inside initial arc")
        } else {
            let back = t - self.total_time;
            self.terminal_arc.eval(back).expect("inside terminal arc")
        };
        [s[0], s[1], s[2], s[3], s[4], s[5], t * self.tau_rate]
    }

    /// Guess control: unit thrust along the velocity, constant throttle on mode 1.
    pub fn control_at(&self, t: f64) -> [f64; 5] {
        let s = self.state_at(t);
        let v = (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]).sqrt();
        if v > 0.0 {
            [s[3] / v, s[4] / v, s[5] / v, self.throttle, 0.0]
        } else {
            [1.0, 0.0, 0.0, self.throttle, 0.0]
        }
    }
}

/// Builds the stacked guess with `n_periods_each` revolutions on each orbit
/// and the given constant mode-1 throttle.
pub fn stacking_guess(
    sys: &SystemParams,
    initial: &PeriodicOrbit,
    terminal: &PeriodicOrbit,
    n_periods_each: usize,
    throttle: f64,
    opts: &PropagatorOptions,
) -> Result<StackedGuess, OrbitError> {
    if n_periods_each < 1 {
        return Err(OrbitError::Periods);
    }
    let throttle = throttle.clamp(0.0, 1.0);
    let n = n_periods_each as f64;
    let t_init = n * initial.period;
    let t_term = n * terminal.period;
    let initial_arc = propagate_cr3bp(sys, &initial.defining_state, (0.0, t_init), opts)?;
    let terminal_arc = propagate_cr3bp(sys, &terminal.defining_state, (0.0, -t_term), opts)?;
    let tau_rate = 1.0 / (sys.mean_motion() * char_time(sys, 0.0));

    let mut guess = StackedGuess {
        nu_grid: Vec::new(),
        state_grid: Vec::new(),
        control_grid: Vec::new(),
        discontinuity_location: 0,
        initial_arc,
        terminal_arc,
        patch_time: t_init,
        total_time: t_init + t_term,
        tau_rate,
        throttle,
    };
    let mut nu_grid: Vec<f64> = guess.initial_arc.grid().to_vec();
    let mut states: Vec<[f64; 7]> = guess
        .initial_arc
        .states()
        .iter()
        .zip(guess.initial_arc.grid())
        .map(|(s, t)| [s[0], s[1], s[2], s[3], s[4], s[5], t * tau_rate])
        .collect();
    let disc = nu_grid.len();
    for (s, t) in guess.terminal_arc.states().iter().zip(guess.terminal_arc.grid()) {
        let tt = t + guess.total_time;
        nu_grid.push(tt);
        states.push([s[0], s[1], s[2], s[3], s[4], s[5], tt * tau_rate]);
    }
    guess.control_grid = nu_grid.iter().map(|t| guess.control_at(*t)).collect();
    // the terminal-side patch sample needs the terminal-side control
    let s = states[disc];
    let v = (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]).sqrt();
    guess.control_grid[disc] = [s[3] / v, s[4] / v, s[5] / v, throttle, 0.0];
    guess.nu_grid = nu_grid;
    guess.state_grid = states;
    guess.discontinuity_location = disc;
    Ok(guess)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> SystemParams {
        SystemParams::earth_moon()
    }

    #[test]
    fn catalog_values_and_periods() {
        let cat = catalog();
        assert_eq!(cat.len(), 2);
        let halo = lookup(L2_SOUTHERN_HALO).unwrap();
        assert_eq!(halo.period, 3.3325377871055926);
        assert!((halo.period_days(&sys()) - 14.77).abs() < 5e-3);
        let nrho = lookup(NRHO).unwrap();
        assert_eq!(nrho.period, 1.8077163954358124);
        assert!((nrho.period_days(&sys()) - 8.01).abs() < 5e-3);
        assert_eq!(halo.defining_state[1], 9.0895948914056935e-30);
        assert!(lookup("l1-lyapunov").is_err());
    }

    #[test]
    fn catalog_jacobi_values_reproduced() {
        for o in catalog() {
            let j = jacobi_constant(&sys(), &o.defining_state).unwrap();
            assert!(((j - o.jacobi) / o.jacobi).abs() < 1e-10, "{}: {j}", o.label);
        }
    }

    #[test]
    fn record_round_trip_is_bit_identical() {
        for o in catalog() {
            let text = serde_json::to_string(o.record()).unwrap();
            let back: OrbitRecord = serde_json::from_str(&text).unwrap();
            assert_eq!(&back, o.record());
            let again = PeriodicOrbit::from_record(back).unwrap();
            assert_eq!(again, o);
        }
        let text = serde_json::to_string(&catalog().iter().map(|o| o.record().clone()).collect::<Vec<_>>()).unwrap();
        assert_eq!(orbits_from_json(&text).unwrap(), catalog());
    }

    #[test]
    fn bad_record_rejected() {
        let mut r = lookup(NRHO).unwrap().record().clone();
        r.period = "abc".into();
        assert!(PeriodicOrbit::from_record(r).is_err());
    }

    #[test]
    fn sample_endpoints() {
        let o = lookup(L2_SOUTHERN_HALO).unwrap();
        let opts = PropagatorOptions::default();
        assert_eq!(sample_orbit(&sys(), &o, 0.0, &opts).unwrap(), o.defining_state);
        let end = sample_orbit(&sys(), &o, 1.0, &opts).unwrap();
        for i in 0..6 {
            assert!((end[i] - o.defining_state[i]).abs() < 1e-6);
        }
        assert!(sample_orbit(&sys(), &o, 1.5, &opts).is_err());
        // half period of a y-symmetric halo lands on the x-z plane
        let half = sample_orbit(&sys(), &o, 0.5, &PropagatorOptions::with_tol(1e-12)).unwrap();
        assert!(half[1].abs() < 1e-8 && half[3].abs() < 1e-8 && half[5].abs() < 1e-8);
    }

    #[test]
    fn stacked_guess_structure() {
        let s = sys();
        let a = lookup(L2_SOUTHERN_HALO).unwrap();
        let b = lookup(NRHO).unwrap();
        let opts = PropagatorOptions::default();
        let g = stacking_guess(&s, &a, &b, 1, 1.0, &opts).unwrap();
        assert!((g.total_time - (a.period + b.period)).abs() < 1e-15);
        let d = g.discontinuity_location;
        let patch = &g.state_grid[d - 1];
        let end = sample_orbit(&s, &a, 1.0, &opts).unwrap();
        for i in 0..6 {
            assert_eq!(patch[i], end[i]);
        }
        assert_eq!(g.nu_grid[d - 1], g.nu_grid[d]);
        let last = g.state_grid.last().unwrap();
        for i in 0..6 {
            assert_eq!(last[i], b.defining_state[i]);
        }
        for c in &g.control_grid {
            assert_eq!(c[3], 1.0);
            assert_eq!(c[4], 0.0);
            assert!(((c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) - 1.0).abs() < 1e-14);
        }
        for st in &g.state_grid[..d] {
            let j = jacobi_constant(&s, &[st[0], st[1], st[2], st[3], st[4], st[5]]).unwrap();
            assert!((j - 3.1141257613953099).abs() < 1e-9);
        }
        assert!(stacking_guess(&s, &a, &b, 0, 1.0, &opts).is_err());
    }
}
