use serde::{Deserialize, Serialize};

use super::lgr::lgr_points_weights;
use super::TranscriptionError;

/// Intervals of one phase on the normalized span `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMesh {
    /// Interval boundaries, strictly increasing from 0 to 1.
    pub fractions: Vec<f64>,
    /// Collocation points per interval.
    pub degrees: Vec<usize>,
}

impl PhaseMesh {
    pub fn uniform(intervals: usize, degree: usize) -> Self {
        let fractions = (0..=intervals).map(|k| k as f64 / intervals as f64).collect();
        Self { fractions, degrees: vec![degree; intervals] }
    }

    pub fn num_intervals(&self) -> usize {
        self.degrees.len()
    }

    pub fn num_collocation(&self) -> usize {
        self.degrees.iter().sum()
    }

    /// State support nodes: collocation points plus the final endpoint.
    pub fn num_nodes(&self) -> usize {
        self.num_collocation() + 1
    }

    /// Index of the first node of interval `k`.
    pub fn interval_start(&self, k: usize) -> usize {
        self.degrees[..k].iter().sum()
    }

    pub fn validate(&self, n_min: usize, n_max: usize) -> Result<(), TranscriptionError> {
        let bad = |m: String| Err(TranscriptionError::Mesh(m));
        let f = &self.fractions;
        if self.degrees.is_empty() || f.len() != self.degrees.len() + 1 {
            return bad(format!("{} fractions for {} intervals", f.len(), self.degrees.len()));
        }
        if f[0] != 0.0 || *f.last().unwrap() != 1.0 {
            return bad("fractions must start at 0 and end at 1".into());
        }
        if !f.windows(2).all(|w| w[0] < w[1]) {
            return bad("fractions must be strictly increasing".into());
        }
        if let Some(d) = self.degrees.iter().find(|d| **d < n_min.max(1) || **d > n_max) {
            return bad(format!("degree {d} outside [{n_min}, {n_max}]"));
        }
        Ok(())
    }

    /// Normalized position in `[0, 1]` of every state node.
    pub fn node_fractions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_nodes());
        for (k, &n) in self.degrees.iter().enumerate() {
            let (a, b) = (self.fractions[k], self.fractions[k + 1]);
            let (pts, _) = lgr_points_weights(n);
            out.extend(pts.iter().map(|t| a + (t + 1.0) * 0.5 * (b - a)));
        }
        out.push(1.0);
        out
    }

    /// Normalized position of every collocation point.
    pub fn collocation_fractions(&self) -> Vec<f64> {
        let mut v = self.node_fractions();
        v.pop();
        v
    }
}

/// One [`PhaseMesh`] per phase, in phase order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mesh {
    pub phases: Vec<PhaseMesh>,
}

impl Mesh {
    pub fn uniform(phases: usize, intervals: usize, degree: usize) -> Self {
        Self { phases: vec![PhaseMesh::uniform(intervals, degree); phases] }
    }

    pub fn validate(&self, n_min: usize, n_max: usize) -> Result<(), TranscriptionError> {
        for (p, m) in self.phases.iter().enumerate() {
            m.validate(n_min, n_max).map_err(|e| TranscriptionError::Mesh(format!("phase {p}: {e}")))?;
        }
        Ok(())
    }

    pub fn total_collocation(&self) -> usize {
        self.phases.iter().map(|m| m.num_collocation()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mesh_counts() {
        let m = PhaseMesh::uniform(10, 4);
        m.validate(2, 12).unwrap();
        assert_eq!(m.num_collocation(), 40);
        assert_eq!(m.num_nodes(), 41);
        assert_eq!(m.interval_start(3), 12);
        let f = m.node_fractions();
        assert_eq!(f.len(), 41);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[4], 0.1);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_meshes_rejected() {
        let mut m = PhaseMesh::uniform(3, 4);
        m.fractions[1] = m.fractions[2];
        assert!(m.validate(2, 12).is_err());
        let m = PhaseMesh { fractions: vec![0.0, 1.0], degrees: vec![13] };
        assert!(m.validate(2, 12).is_err());
        let m = PhaseMesh { fractions: vec![0.0, 0.9], degrees: vec![4] };
        assert!(m.validate(2, 12).is_err());
    }
}
