//! Risk-aware rendezvous planning for an energy-constrained aircraft
//! cooperating with a mobile ground recharger.
//!
//! The pipeline: a mission file describes the road network, both task
//! routes, and the stochastic energy model; [`cmdp`] compiles it into a
//! finite constrained decision process; [`lp`] solves the occupancy-measure
//! linear program and extracts the randomized policy; [`sim`] evaluates any
//! policy with seeded Monte-Carlo rollouts on the continuous dynamics.

pub mod benchmark;
pub mod cmdp;
pub mod energy;
pub mod geom;
pub mod lp;
pub mod mission;
pub mod par;
pub mod plan;
pub mod patrol;
pub mod rendezvous;
pub mod roadnet;
pub mod sim;
pub mod streams;

pub use geom::{euclidean, Point};
pub use mission::{MissionError, MissionSpec};
