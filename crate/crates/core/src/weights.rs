//! Barycentric communication weights and their time-varying blend.

use crate::{AgentId, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Smallest |signed area| (m²) a communication simplex may have.
pub const MIN_SIMPLEX_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("singular simplex: signed area {area:e} m² is below {MIN_SIMPLEX_AREA:e}")]
    SingularSimplex { area: f64 },
    #[error("time {t} s precedes schedule start {t0} s")]
    BeforeStart { t: f64, t0: f64 },
    #[error("schedule window is empty: t0 = {t0} s, tf = {tf} s")]
    EmptyWindow { t0: f64, tf: f64 },
    #[error("agent {0} has no weight schedule")]
    UnknownFollower(AgentId),
    #[error("agent {id}: initial and final weights name different neighbors")]
    NeighborMismatch { id: AgentId },
}

/// Barycentric coordinates of a point with respect to an ordered triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barycentric {
    pub values: [f64; 3],
    /// Set when some coordinate is negative, i.e. the point lies outside.
    pub exterior: bool,
}

impl Barycentric {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Solves `p = Σ w_k v_k`, `Σ w_k = 1` for the three weights.
///
/// The affine system is reduced to a 2×2 solve relative to the last vertex,
/// and the last weight is recovered from the unit-sum row.
pub fn solve_simplex_weights(p: Vec2, triangle: [Vec2; 3]) -> Result<Barycentric, WeightError> {
    let [a, b, c] = triangle;
    let e1 = a - c;
    let e2 = b - c;
    let det = e1.x * e2.y - e2.x * e1.y;
    let area = 0.5 * det;
    if !(area.abs() > MIN_SIMPLEX_AREA) {
        return Err(WeightError::SingularSimplex { area });
    }
    let r = p - c;
    let w1 = (r.x * e2.y - e2.x * r.y) / det;
    let w2 = (e1.x * r.y - r.x * e1.y) / det;
    let w3 = 1.0 - w1 - w2;
    let values = [w1, w2, w3];
    Ok(Barycentric {
        values,
        exterior: values.iter().any(|&w| w < 0.0),
    })
}

/// Minimum-jerk blending profile `10s³ − 15s⁴ + 6s⁵` on `s = (t − t0)/(tf − t0)`.
///
/// Saturates at 1 for `t >= tf`.
pub fn beta(t: f64, t0: f64, tf: f64) -> Result<f64, WeightError> {
    if !(tf > t0) {
        return Err(WeightError::EmptyWindow { t0, tf });
    }
    if t < t0 {
        return Err(WeightError::BeforeStart { t, t0 });
    }
    let s = ((t - t0) / (tf - t0)).min(1.0);
    Ok(s * s * s * (10.0 + s * (-15.0 + 6.0 * s)))
}

/// Three in-neighbors with one weight each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTriple {
    pub neighbors: [AgentId; 3],
    pub values: [f64; 3],
}

impl WeightTriple {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `Σ w_k · positions[neighbor_k]`.
    pub fn combine(&self, positions: impl Fn(AgentId) -> Option<Vec2>) -> Option<Vec2> {
        let mut acc = Vec2::zeros();
        for (id, w) in self.neighbors.iter().zip(self.values) {
            acc += w * positions(*id)?;
        }
        Some(acc)
    }
}

/// Initial and final weights of one follower over the same neighbor triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerWeights {
    pub neighbors: [AgentId; 3],
    pub omega: [f64; 3],
    pub varpi: [f64; 3],
}

/// Per-follower blend from reference weights to final weights over `[t0, tf]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    t0: f64,
    tf: f64,
    followers: BTreeMap<AgentId, FollowerWeights>,
}

impl WeightSchedule {
    pub fn new(
        t0: f64,
        tf: f64,
        initial: &BTreeMap<AgentId, WeightTriple>,
        last: &BTreeMap<AgentId, WeightTriple>,
    ) -> Result<Self, WeightError> {
        if !(tf > t0) {
            return Err(WeightError::EmptyWindow { t0, tf });
        }
        let mut followers = BTreeMap::new();
        for (&id, omega) in initial {
            let varpi = last.get(&id).ok_or(WeightError::UnknownFollower(id))?;
            if varpi.neighbors != omega.neighbors {
                return Err(WeightError::NeighborMismatch { id });
            }
            followers.insert(
                id,
                FollowerWeights {
                    neighbors: omega.neighbors,
                    omega: omega.values,
                    varpi: varpi.values,
                },
            );
        }
        if let Some(&id) = last.keys().find(|id| !initial.contains_key(id)) {
            return Err(WeightError::UnknownFollower(id));
        }
        Ok(Self { t0, tf, followers })
    }

    pub fn from_followers(
        t0: f64,
        tf: f64,
        followers: BTreeMap<AgentId, FollowerWeights>,
    ) -> Result<Self, WeightError> {
        if !(tf > t0) {
            return Err(WeightError::EmptyWindow { t0, tf });
        }
        Ok(Self { t0, tf, followers })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn followers(&self) -> &BTreeMap<AgentId, FollowerWeights> {
        &self.followers
    }

    pub fn follower(&self, id: AgentId) -> Option<&FollowerWeights> {
        self.followers.get(&id)
    }

    pub fn beta(&self, t: f64) -> Result<f64, WeightError> {
        beta(t, self.t0, self.tf)
    }

    /// Blended weights `(1 − β(t))·ω + β(t)·ϖ`; exactly `ϖ` once `t >= tf`.
    pub fn weight_at(&self, t: f64, id: AgentId) -> Result<WeightTriple, WeightError> {
        let fw = self.followers.get(&id).ok_or(WeightError::UnknownFollower(id))?;
        let b = self.beta(t)?;
        let values = if t >= self.tf {
            fw.varpi
        } else {
            std::array::from_fn(|k| (1.0 - b) * fw.omega[k] + b * fw.varpi[k])
        };
        Ok(WeightTriple {
            neighbors: fw.neighbors,
            values,
        })
    }

    /// Replaces every initial weight with the final one.
    pub fn settled(&self) -> Self {
        let followers = self
            .followers
            .iter()
            .map(|(&id, fw)| {
                (
                    id,
                    FollowerWeights {
                        omega: fw.varpi,
                        ..*fw
                    },
                )
            })
            .collect();
        Self {
            followers,
            ..*self
        }
    }
}
