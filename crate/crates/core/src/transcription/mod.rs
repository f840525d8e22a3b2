//! Multiple-phase Legendre-Gauss-Radau collocation of the transfer problem.
//!
//! Phases are ordered: the coast on the initial orbit, one phase per
//! transfer domain, the coast on the terminal orbit. Each phase is split
//! into intervals on a normalized span `[0, 1]`; interval `k` of degree `N`
//! carries `N` collocation points and shares its final state node with the
//! next interval. Coast phases use the circular model with `ν` advancing as
//! circular time; transfer domains use the elliptic model.
//!
//! Interface conditions are ordinary constraint rows, and all boundary
//! values that are fixed by the problem are encoded as variable bounds. Both
//! kinds are listed, tagged, in [`ConstraintSet`].

mod assembly;
pub mod constraints;
mod elements;
pub mod layout;
pub mod lgr;
pub mod mesh;
pub mod solution;

use thiserror::Error;

pub use assembly::{transcribe, TranscribedNlp, Transcription, MASS_FLOOR, MAX_DEGREE};
pub use constraints::{BoundRecord, ConstraintSet, RowInfo, Tag};
pub use layout::{DecisionLayout, DecisionValues, PhaseKind, PhaseLayout, PhaseValues, STATIC_COUNT};
pub use lgr::{differentiation_matrix, lgr_points_weights};
pub use mesh::{Mesh, PhaseMesh};
pub use solution::{
    interpolate_phase, phase_solutions, Guess, PhaseGuess, PhaseHistory, PhaseSolution, PhaseTable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranscriptionError {
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0}")]
    Problem(String),
    #[error("guess cannot be evaluated: {0}")]
    Guess(String),
    #[error("anomaly {nu} outside phase span [{lo}, {hi}]")]
    OutOfSpan { nu: f64, lo: f64, hi: f64 },
}

/// Static parameters `(c, s)` whose angle maps to `fraction` of a period.
pub fn fraction_to_pair(fraction: f64) -> (f64, f64) {
    let a = 2.0 * std::f64::consts::PI * fraction - std::f64::consts::PI;
    (a.cos(), a.sin())
}

/// Inverse of [`fraction_to_pair`], in `[0, 1]`.
pub fn pair_to_fraction(c: f64, s: f64) -> f64 {
    (s.atan2(c) + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
}

/// Static parameters `(c, s)` encoding an initial anomaly in `[0, 2π]`.
pub fn anomaly_to_pair(nu0: f64) -> (f64, f64) {
    let a = nu0 - std::f64::consts::PI;
    (a.cos(), a.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_pairs_round_trip() {
        for f in [0.01, 0.25, 0.5, 0.52471, 0.99] {
            let (c, s) = fraction_to_pair(f);
            assert!((c * c + s * s - 1.0).abs() < 1e-15);
            assert!((pair_to_fraction(c, s) - f).abs() < 1e-14);
        }
        // atan2 = 0 is half a period
        assert_eq!(pair_to_fraction(1.0, 0.0), 0.5);
        let (c, s) = anomaly_to_pair(1.0);
        assert!((s.atan2(c) + std::f64::consts::PI - 1.0).abs() < 1e-15);
    }
}
