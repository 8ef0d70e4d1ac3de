//! Decentralized aerial coverage planning and simulation.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`formation`] turns a reference formation into a layered communication
//!    graph in which every follower listens to exactly three agents whose
//!    triangle strictly encloses it.
//! 2. [`heatmap`] models service demand as a priority-weighted mixture of
//!    Gaussian target maps and integrates it over convex regions.
//! 3. [`planner`] sweeps the graph layer by layer, placing each follower at
//!    the demand-weighted centroid of its neighbors' desired triangle, and
//!    derives the final communication weights ([`weights`]).
//! 4. [`sim`] flies a team of feedback-linearized quadcopters
//!    ([`quadcopter`]) under the time-varying containment law.

use serde::{Deserialize, Serialize};
use std::fmt;

pub mod formation;
pub mod geometry;
pub mod heatmap;
pub mod planner;
pub mod quadcopter;
pub mod sim;
pub mod weights;

pub use formation::{LayeredGraph, ReferenceConfiguration};
pub use heatmap::{Application, HeatMap};
pub use planner::{DesiredConfiguration, Plan};
pub use weights::{WeightSchedule, WeightTriple};

/// Planar position or displacement, meters.
pub type Vec2 = nalgebra::Vector2<f64>;
/// Spatial position, meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Gravity acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Identifier of one agent of the team.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for AgentId {
    fn from(v: u32) -> Self {
        AgentId(v)
    }
}

pub(crate) fn join_ids(ids: &[AgentId]) -> String {
    ids.iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
