//! Minimum-time, propellant-constrained multi-mode transfers between periodic
//! orbits of the Earth-Moon system.

pub mod dual;
pub mod dynamics;
pub mod mesh_refinement;
pub mod mission;
pub mod nlp;
pub mod orbits;
pub mod propagator;
pub mod transcription;
