//! Collocated phase histories and initial guesses.

use serde::{Deserialize, Serialize};

use super::layout::{DecisionLayout, PhaseKind, STATIC_COUNT};
use super::lgr::{barycentric_eval, barycentric_weights, lgr_points_weights};
use super::mesh::{Mesh, PhaseMesh};
use super::TranscriptionError;
use crate::propagator::StateHistory;

/// Nodal values of one phase on its mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolution {
    pub kind: PhaseKind,
    pub mesh: PhaseMesh,
    pub nu0: f64,
    pub nuf: f64,
    /// One per state node.
    pub states: Vec<Vec<f64>>,
    /// One per collocation point; empty rows on coast phases.
    pub controls: Vec<Vec<f64>>,
}

impl PhaseSolution {
    /// Interval containing normalized position `s` and the local coordinate
    /// in `[-1, 1]`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let f = &self.mesh.fractions;
        let k = f[1..f.len() - 1].partition_point(|b| *b <= s);
        let (a, b) = (f[k], f[k + 1]);
        (k, (2.0 * (s - a) / (b - a) - 1.0).clamp(-1.0, 1.0))
    }

    fn fraction(&self, nu: f64) -> Result<f64, TranscriptionError> {
        let (a, b) = (self.nu0.min(self.nuf), self.nu0.max(self.nuf));
        let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if !(nu >= a - slack && nu <= b + slack) {
            return Err(TranscriptionError::OutOfSpan { nu, lo: a, hi: b });
        }
        if b == a {
            return Ok(0.0);
        }
        Ok(((nu - self.nu0) / (self.nuf - self.nu0)).clamp(0.0, 1.0))
    }

    pub fn state_at_fraction(&self, s: f64) -> Vec<f64> {
        let (k, t) = self.locate(s);
        let n = self.mesh.degrees[k];
        let start = self.mesh.interval_start(k);
        let mut pts = lgr_points_weights(n).0;
        pts.push(1.0);
        let bw = barycentric_weights(&pts);
        let vals: Vec<&[f64]> = (0..=n).map(|j| &self.states[start + j][..]).collect();
        let mut out = vec![0.0; self.states[0].len()];
        barycentric_eval(&pts, &bw, &vals, t, &mut out);
        out
    }

    pub fn control_at_fraction(&self, s: f64) -> Vec<f64> {
        if self.controls.is_empty() || self.controls[0].is_empty() {
            return Vec::new();
        }
        let (k, t) = self.locate(s);
        let n = self.mesh.degrees[k];
        let start = self.mesh.interval_start(k);
        let pts = lgr_points_weights(n).0;
        let bw = barycentric_weights(&pts);
        let vals: Vec<&[f64]> = (0..n).map(|j| &self.controls[start + j][..]).collect();
        let mut out = vec![0.0; self.controls[0].len()];
        barycentric_eval(&pts, &bw, &vals, t, &mut out);
        out
    }

    pub fn state_at(&self, nu: f64) -> Result<Vec<f64>, TranscriptionError> {
        Ok(self.state_at_fraction(self.fraction(nu)?))
    }

    pub fn control_at(&self, nu: f64) -> Result<Vec<f64>, TranscriptionError> {
        Ok(self.control_at_fraction(self.fraction(nu)?))
    }

    pub fn node_anomalies(&self) -> Vec<f64> {
        let d = self.nuf - self.nu0;
        self.mesh.node_fractions().iter().map(|s| self.nu0 + s * d).collect()
    }

    pub fn collocation_anomalies(&self) -> Vec<f64> {
        let mut v = self.node_anomalies();
        v.pop();
        v
    }

    /// `[ν_a, ν_b]` of interval `k`.
    pub fn interval_span(&self, k: usize) -> (f64, f64) {
        let d = self.nuf - self.nu0;
        (self.nu0 + self.mesh.fractions[k] * d, self.nu0 + self.mesh.fractions[k + 1] * d)
    }
}

impl StateHistory for PhaseSolution {
    fn span(&self) -> (f64, f64) {
        (self.nu0, self.nuf)
    }
    fn dim(&self) -> usize {
        self.states[0].len()
    }
    fn state_at(&self, t: f64) -> Vec<f64> {
        PhaseSolution::state_at(self, t).expect("query inside phase span")
    }
    fn sample_hints(&self) -> Vec<f64> {
        self.node_anomalies()
    }
}

/// Splits a decision vector into per-phase histories.
pub fn phase_solutions(
    layout: &DecisionLayout,
    mesh: &Mesh,
    z: &[f64],
) -> Result<Vec<PhaseSolution>, TranscriptionError> {
    let v = layout.unpack(z)?;
    Ok(layout
        .phases
        .iter()
        .zip(v.phases)
        .zip(&mesh.phases)
        .map(|((pl, pv), pm)| PhaseSolution {
            kind: pl.kind,
            mesh: pm.clone(),
            nu0: pv.nu0,
            nuf: pv.nuf,
            states: pv.states,
            controls: pv.controls,
        })
        .collect())
}

/// State and control of `phase` at anomaly `nu`.
pub fn interpolate_phase(
    solution: &[PhaseSolution],
    phase: usize,
    nu: f64,
) -> Result<(Vec<f64>, Vec<f64>), TranscriptionError> {
    let p = solution
        .get(phase)
        .ok_or_else(|| TranscriptionError::Dimension(format!("no phase {phase}")))?;
    Ok((p.state_at(nu)?, p.control_at(nu)?))
}

/// Tabulated history on the normalized span `[0, 1]`, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    /// Nondecreasing sample positions in `[0, 1]`.
    pub fractions: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Empty, or one control per sample.
    pub controls: Vec<Vec<f64>>,
}

impl PhaseTable {
    fn lerp(&self, rows: &[Vec<f64>], s: f64) -> Vec<f64> {
        let f = &self.fractions;
        let k = f.partition_point(|v| *v <= s).clamp(1, f.len() - 1);
        let (a, b) = (f[k - 1], f[k]);
        let w = if b > a { ((s - a) / (b - a)).clamp(0.0, 1.0) } else { 1.0 };
        rows[k - 1].iter().zip(&rows[k]).map(|(x, y)| x + w * (y - x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhaseHistory {
    Table(PhaseTable),
    Collocated(PhaseSolution),
}

/// Initial values for one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGuess {
    pub nu0: f64,
    pub nuf: f64,
    pub history: PhaseHistory,
}

impl PhaseGuess {
    pub fn state(&self, s: f64) -> Vec<f64> {
        match &self.history {
            PhaseHistory::Table(t) => t.lerp(&t.states, s),
            PhaseHistory::Collocated(p) => p.state_at_fraction(s),
        }
    }

    /// Control at `s`; empty when the history carries none.
    pub fn control(&self, s: f64) -> Vec<f64> {
        match &self.history {
            PhaseHistory::Table(t) if t.controls.is_empty() => Vec::new(),
            PhaseHistory::Table(t) => t.lerp(&t.controls, s),
            PhaseHistory::Collocated(p) => p.control_at_fraction(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guess {
    pub phases: Vec<PhaseGuess>,
    pub statics: [f64; STATIC_COUNT],
}

impl Guess {
    /// Reuses converged phase histories as they are.
    pub fn from_solution(phases: &[PhaseSolution], statics: [f64; STATIC_COUNT]) -> Self {
        Self {
            phases: phases
                .iter()
                .map(|p| PhaseGuess { nu0: p.nu0, nuf: p.nuf, history: PhaseHistory::Collocated(p.clone()) })
                .collect(),
            statics,
        }
    }
}
