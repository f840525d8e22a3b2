use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::TranscriptionError;

pub const STATIC_COUNT: usize = 6;

/// What a phase models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    InitialCoast,
    /// Transfer domain with its index.
    Transfer(usize),
    TerminalCoast,
}

impl PhaseKind {
    pub fn state_dim(self) -> usize {
        match self {
            PhaseKind::Transfer(_) => 8,
            _ => 7,
        }
    }

    pub fn control_dim(self) -> usize {
        match self {
            PhaseKind::Transfer(_) => 5,
            _ => 0,
        }
    }

    pub fn is_transfer(self) -> bool {
        matches!(self, PhaseKind::Transfer(_))
    }
}

/// Position of one phase's variables inside the decision vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLayout {
    pub kind: PhaseKind,
    pub state_dim: usize,
    pub control_dim: usize,
    pub num_nodes: usize,
    pub num_collocation: usize,
    /// Node-major states: node `k`, component `i` at `states + k * state_dim + i`.
    pub states: usize,
    /// Collocation-point-major controls.
    pub controls: usize,
    pub nu0: usize,
    pub nuf: usize,
}

impl PhaseLayout {
    pub fn state(&self, node: usize, comp: usize) -> usize {
        self.states + node * self.state_dim + comp
    }

    pub fn control(&self, point: usize, comp: usize) -> usize {
        self.controls + point * self.control_dim + comp
    }

    pub fn len(&self) -> usize {
        self.num_nodes * self.state_dim + self.num_collocation * self.control_dim + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Offsets of every variable block. The blocks are, in order: for each
/// phase its states, controls, `ν₀` and `ν_f`; then the six static
/// parameters; then the mode-1 propellant integral when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLayout {
    pub phases: Vec<PhaseLayout>,
    /// `[c₀, s₀, c_f, s_f, c_ν0, s_ν0]` start here.
    pub statics: usize,
    pub integral: Option<usize>,
    pub len: usize,
}

impl DecisionLayout {
    pub fn new(mesh: &Mesh, domains: usize, with_integral: bool) -> Result<Self, TranscriptionError> {
        if mesh.phases.len() != domains + 2 {
            return Err(TranscriptionError::Dimension(format!(
                "mesh has {} phases, problem needs {}",
                mesh.phases.len(),
                domains + 2
            )));
        }
        let mut off = 0;
        let mut phases = Vec::with_capacity(domains + 2);
        for (p, pm) in mesh.phases.iter().enumerate() {
            let kind = if p == 0 {
                PhaseKind::InitialCoast
            } else if p == domains + 1 {
                PhaseKind::TerminalCoast
            } else {
                PhaseKind::Transfer(p - 1)
            };
            let (nx, nu) = (kind.state_dim(), kind.control_dim());
            let num_nodes = pm.num_nodes();
            let num_collocation = pm.num_collocation();
            let states = off;
            let controls = states + num_nodes * nx;
            let nu0 = controls + num_collocation * nu;
            phases.push(PhaseLayout {
                kind,
                state_dim: nx,
                control_dim: nu,
                num_nodes,
                num_collocation,
                states,
                controls,
                nu0,
                nuf: nu0 + 1,
            });
            off = nu0 + 2;
        }
        let statics = off;
        off += STATIC_COUNT;
        let integral = with_integral.then_some(off);
        if with_integral {
            off += 1;
        }
        Ok(Self { phases, statics, integral, len: off })
    }

    /// Splits a decision vector into named blocks.
    pub fn unpack(&self, z: &[f64]) -> Result<DecisionValues, TranscriptionError> {
        if z.len() != self.len {
            return Err(TranscriptionError::Dimension(format!("vector length {} vs layout {}", z.len(), self.len)));
        }
        let phases = self
            .phases
            .iter()
            .map(|pl| PhaseValues {
                states: (0..pl.num_nodes)
                    .map(|k| z[pl.state(k, 0)..pl.state(k, 0) + pl.state_dim].to_vec())
                    .collect(),
                controls: (0..pl.num_collocation)
                    .map(|k| z[pl.control(k, 0)..pl.control(k, 0) + pl.control_dim].to_vec())
                    .collect(),
                nu0: z[pl.nu0],
                nuf: z[pl.nuf],
            })
            .collect();
        let mut statics = [0.0; STATIC_COUNT];
        statics.copy_from_slice(&z[self.statics..self.statics + STATIC_COUNT]);
        Ok(DecisionValues { phases, statics, integral: self.integral.map(|i| z[i]) })
    }

    pub fn pack(&self, v: &DecisionValues) -> Result<Vec<f64>, TranscriptionError> {
        let dim = |m: String| TranscriptionError::Dimension(m);
        if v.phases.len() != self.phases.len() || v.integral.is_some() != self.integral.is_some() {
            return Err(dim("block structure differs from layout".into()));
        }
        let mut z = vec![0.0; self.len];
        for (p, (pl, pv)) in self.phases.iter().zip(&v.phases).enumerate() {
            if pv.states.len() != pl.num_nodes || pv.controls.len() != pl.num_collocation {
                return Err(dim(format!("phase {p}: node counts differ from layout")));
            }
            for (k, s) in pv.states.iter().enumerate() {
                if s.len() != pl.state_dim {
                    return Err(dim(format!("phase {p}: state {k} has {} components", s.len())));
                }
                z[pl.state(k, 0)..pl.state(k, 0) + pl.state_dim].copy_from_slice(s);
            }
            for (k, u) in pv.controls.iter().enumerate() {
                if u.len() != pl.control_dim {
                    return Err(dim(format!("phase {p}: control {k} has {} components", u.len())));
                }
                z[pl.control(k, 0)..pl.control(k, 0) + pl.control_dim].copy_from_slice(u);
            }
            z[pl.nu0] = pv.nu0;
            z[pl.nuf] = pv.nuf;
        }
        z[self.statics..self.statics + STATIC_COUNT].copy_from_slice(&v.statics);
        if let (Some(i), Some(q)) = (self.integral, v.integral) {
            z[i] = q;
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseValues {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub nu0: f64,
    pub nuf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionValues {
    pub phases: Vec<PhaseValues>,
    pub statics: [f64; STATIC_COUNT],
    pub integral: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcription::mesh::PhaseMesh;

    fn mesh() -> Mesh {
        Mesh {
            phases: vec![
                PhaseMesh::uniform(2, 3),
                PhaseMesh { fractions: vec![0.0, 0.25, 1.0], degrees: vec![4, 2] },
                PhaseMesh::uniform(1, 5),
            ],
        }
    }

    #[test]
    fn blocks_cover_vector_exactly_once() {
        let l = DecisionLayout::new(&mesh(), 1, true).unwrap();
        let mut hit = vec![0u8; l.len];
        for pl in &l.phases {
            for k in 0..pl.num_nodes {
                for i in 0..pl.state_dim {
                    hit[pl.state(k, i)] += 1;
                }
            }
            for k in 0..pl.num_collocation {
                for i in 0..pl.control_dim {
                    hit[pl.control(k, i)] += 1;
                }
            }
            hit[pl.nu0] += 1;
            hit[pl.nuf] += 1;
        }
        for i in 0..STATIC_COUNT {
            hit[l.statics + i] += 1;
        }
        hit[l.integral.unwrap()] += 1;
        assert!(hit.iter().all(|h| *h == 1));
        assert_eq!(l.phases.iter().map(|p| p.len()).sum::<usize>() + 7, l.len);
    }

    #[test]
    fn wrong_phase_count_rejected() {
        assert!(DecisionLayout::new(&mesh(), 3, true).is_err());
    }
}
