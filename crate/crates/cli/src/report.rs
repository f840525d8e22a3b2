//! Reports, trajectory tables and sweep tables.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use mmt::mission::{SweepEntry, TransferSolution};
use mmt::transcription::{PhaseKind, PhaseSolution};
use serde::{Deserialize, Serialize};

use crate::config::{ProblemEcho, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acceptance {
    pub converged: bool,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Acceptance {
    pub fn new(solution: &TransferSolution, tolerance: f64) -> Self {
        Self { converged: solution.converged, max_error: solution.max_error, tolerance }
    }

    pub fn passes(&self) -> bool {
        self.converged && self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub scenario: ScenarioConfig,
    pub problem: ProblemEcho,
    pub solution: TransferSolution,
    pub acceptance: Acceptance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReport {
    pub scenario: ScenarioConfig,
    pub problem: ProblemEcho,
    pub entries: Vec<SweepEntry>,
}

/// Any report the CLI writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Report {
    Run(RunReport),
    Sweep(SweepReport),
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports hold only finite numbers")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn problem(&self) -> &ProblemEcho {
        match self {
            Report::Run(r) => &r.problem,
            Report::Sweep(r) => &r.problem,
        }
    }

    /// Solutions claimed converged, labeled for messages.
    pub fn converged_solutions(&self) -> Vec<(String, &TransferSolution)> {
        match self {
            Report::Run(r) => vec![("solution".to_string(), &r.solution)],
            Report::Sweep(r) => r
                .entries
                .iter()
                .filter_map(|e| e.solution.as_ref().filter(|s| s.converged).map(|s| (format!("bound {} kg", e.bound_kg), s)))
                .collect(),
        }
    }
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub const TRAJECTORY_HEADER: &str = "nu,tau,x,y,z,vx,vy,vz,m_s,ux,uy,uz,delta1,delta2";

/// One row per state node. Coast phases hold circular-model states, have
/// no control, and carry the mass of the adjoining transfer boundary.
pub fn trajectory_csv(phase: &PhaseSolution, coast_mass: f64) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    let nus = phase.node_anomalies();
    for (k, (nu, x)) in nus.iter().zip(&phase.states).enumerate() {
        let (mass, u) = match phase.kind {
            PhaseKind::Transfer(_) => {
                let u = phase.controls.get(k).or(phase.controls.last()).cloned().unwrap_or_else(|| vec![0.0; 5]);
                (x[7], u)
            }
            _ => (coast_mass, vec![0.0; 5]),
        };
        let row = [*nu, x[6], x[0], x[1], x[2], x[3], x[4], x[5], mass, u[0], u[1], u[2], u[3], u[4]];
        let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// File name and table for every phase of `solution`.
pub fn trajectory_tables(solution: &TransferSolution) -> Vec<(String, String)> {
    let transfers: Vec<&PhaseSolution> = solution.phases.iter().filter(|p| p.kind.is_transfer()).collect();
    let first_mass = transfers.first().map_or(1.0, |p| p.states[0][7]);
    let last_mass = transfers.last().map_or(1.0, |p| p.states.last().expect("nodes")[7]);
    solution
        .phases
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (name, mass) = match p.kind {
                PhaseKind::InitialCoast => ("initial_coast".to_string(), first_mass),
                PhaseKind::Transfer(d) => (format!("transfer_domain{d}"), 1.0),
                PhaseKind::TerminalCoast => ("terminal_coast".to_string(), last_mass),
            };
            (format!("phase{i}_{name}.csv"), trajectory_csv(p, mass))
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "bound_kg,duration_days,mode1_fuel_kg,mode2_fuel_kg,total_fuel_kg,switch_count,status";

pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for e in entries {
        match &e.solution {
            Some(s) => {
                let m = &s.metrics;
                let status = if s.converged { "converged" } else { "not-converged" };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{status}",
                    num(e.bound_kg),
                    num(m.duration_days),
                    num(m.mode1_fuel_kg),
                    num(m.mode2_fuel_kg),
                    num(m.total_fuel_kg),
                    m.switch_count
                );
            }
            None => {
                let _ = writeln!(out, "{},,,,,,failed", num(e.bound_kg));
            }
        }
    }
    out
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
