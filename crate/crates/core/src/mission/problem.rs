use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{SpacecraftParams, SystemParams};
use crate::orbits::PeriodicOrbit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid problem: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSelection {
    #[serde(rename = "only-mode-1")]
    OnlyMode1,
    #[serde(rename = "only-mode-2")]
    OnlyMode2,
    MultiMode,
}

/// Throttle activity of one mode inside one domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activity {
    /// Full throttle.
    On,
    Off,
    /// Throttle in `[0, 1]`.
    Free,
}

impl Activity {
    pub fn fixed_value(self) -> Option<f64> {
        match self {
            Activity::On => Some(1.0),
            Activity::Off => Some(0.0),
            Activity::Free => None,
        }
    }
}

/// One segment of the transfer phase with fixed throttle activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub mode1: Activity,
    pub mode2: Activity,
}

impl Domain {
    pub fn new(mode1: Activity, mode2: Activity) -> Self {
        Self { mode1, mode2 }
    }

    pub fn activity(&self, mode: usize) -> Activity {
        if mode == 0 {
            self.mode1
        } else {
            self.mode2
        }
    }

    /// Both throttles fixed at zero: the thrust direction is irrelevant.
    pub fn is_coast(&self) -> bool {
        self.mode1 == Activity::Off && self.mode2 == Activity::Off
    }

    /// Both throttles free, so at most one may be nonzero.
    pub fn needs_complementarity(&self) -> bool {
        self.mode1 == Activity::Free && self.mode2 == Activity::Free
    }
}

/// Full statement of one transfer: two coasts on the periodic orbits and a
/// controlled transfer split into throttle domains.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferProblem {
    pub sys: SystemParams,
    pub sc: SpacecraftParams,
    pub initial_orbit: PeriodicOrbit,
    pub terminal_orbit: PeriodicOrbit,
    /// Mode-1 propellant bound as a fraction of the initial mass.
    pub propellant_bound: Option<f64>,
    pub mode_selection: ModeSelection,
    pub domains: Vec<Domain>,
    /// Minimum altitudes above each primary [km].
    pub min_altitudes: [f64; 2],
}

pub const DEFAULT_MIN_ALTITUDES: [f64; 2] = [500.0, 200.0];

impl TransferProblem {
    /// Single free domain for the selected modes, no propellant bound.
    pub fn unconstrained(
        sys: SystemParams,
        sc: SpacecraftParams,
        initial_orbit: PeriodicOrbit,
        terminal_orbit: PeriodicOrbit,
        mode_selection: ModeSelection,
    ) -> Self {
        Self {
            sys,
            sc,
            initial_orbit,
            terminal_orbit,
            propellant_bound: None,
            mode_selection,
            domains: vec![free_domain(mode_selection)],
            min_altitudes: DEFAULT_MIN_ALTITUDES,
        }
    }

    pub fn with_bound_kg(mut self, kg: Option<f64>) -> Self {
        self.propellant_bound = kg.map(|v| v / self.sc.m0);
        self
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |m: String| Err(ProblemError::Invalid(m));
        self.sys.validate().map_err(|e| ProblemError::Invalid(e.to_string()))?;
        self.sc.validate().map_err(|e| ProblemError::Invalid(e.to_string()))?;
        if let Some(b) = self.propellant_bound {
            if !(0.0..=1.0).contains(&b) {
                return bad(format!("propellant bound {b} outside [0, 1]"));
            }
        }
        if self.domains.is_empty() {
            return bad("at least one domain required".into());
        }
        for (k, d) in self.domains.iter().enumerate() {
            if d.mode1 == Activity::On && d.mode2 == Activity::On {
                return bad(format!("domain {k} has both modes on"));
            }
            let unused = match self.mode_selection {
                ModeSelection::OnlyMode1 => Some(d.mode2),
                ModeSelection::OnlyMode2 => Some(d.mode1),
                ModeSelection::MultiMode => None,
            };
            if unused.is_some_and(|a| a != Activity::Off) {
                return bad(format!("domain {k} uses a mode excluded by {:?}", self.mode_selection));
            }
        }
        if self.min_altitudes.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return bad("minimum altitudes must be nonnegative".into());
        }
        Ok(())
    }
}

pub fn free_domain(sel: ModeSelection) -> Domain {
    match sel {
        ModeSelection::OnlyMode1 => Domain::new(Activity::Free, Activity::Off),
        ModeSelection::OnlyMode2 => Domain::new(Activity::Off, Activity::Free),
        ModeSelection::MultiMode => Domain::new(Activity::Free, Activity::Free),
    }
}

/// Three-domain template for the selected modes: thrust, middle, thrust.
pub fn three_domain_template(sel: ModeSelection) -> Vec<Domain> {
    use Activity::*;
    let middle = match sel {
        ModeSelection::MultiMode => Domain::new(Off, On),
        _ => Domain::new(Off, Off),
    };
    match sel {
        ModeSelection::OnlyMode2 => vec![Domain::new(Off, On)],
        _ => vec![Domain::new(On, Off), middle, Domain::new(On, Off)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{lookup, L2_SOUTHERN_HALO, NRHO};

    fn base(sel: ModeSelection) -> TransferProblem {
        TransferProblem::unconstrained(
            SystemParams::earth_moon(),
            SpacecraftParams::case1(),
            lookup(L2_SOUTHERN_HALO).unwrap(),
            lookup(NRHO).unwrap(),
            sel,
        )
    }

    #[test]
    fn bound_is_normalized_by_initial_mass() {
        let p = base(ModeSelection::OnlyMode1).with_bound_kg(Some(40.0));
        assert_eq!(p.propellant_bound, Some(0.4));
        p.validate().unwrap();
    }

    #[test]
    fn mode_two_only_switches_mode_one_off() {
        let p = base(ModeSelection::OnlyMode2);
        assert!(p.domains.iter().all(|d| d.mode1 == Activity::Off));
        p.validate().unwrap();
        let mut q = p.clone();
        q.domains[0].mode1 = Activity::Free;
        assert!(q.validate().is_err());
    }

    #[test]
    fn templates() {
        let t = three_domain_template(ModeSelection::OnlyMode1);
        assert_eq!(t.len(), 3);
        assert!(t[1].is_coast());
        let t = three_domain_template(ModeSelection::MultiMode);
        assert_eq!(t[1], Domain::new(Activity::Off, Activity::On));
        assert!(t.iter().all(|d| !(d.mode1 == Activity::On && d.mode2 == Activity::On)));
    }
}
