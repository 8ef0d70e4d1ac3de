//! Forward pass: desired positions layer by layer, then final weights.

use crate::formation::{FormationError, LayeredGraph, ReferenceConfiguration};
use crate::geometry::{is_strictly_convex_ccw, signed_area, vertex_mean};
use crate::heatmap::{integrate_polygon, Density, HeatMapError};
use crate::weights::{solve_simplex_weights, WeightError, WeightSchedule, WeightTriple, MIN_SIMPLEX_AREA};
use crate::{join_ids, AgentId, Vec2};
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// Below this mass a simplex counts as empty and its follower goes to the
/// geometric centroid.
pub const ZERO_MASS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Formation(#[from] FormationError),
    #[error(transparent)]
    HeatMap(#[from] HeatMapError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("boundary agents [{}] have no target position", join_ids(.0))]
    MissingBoundaryTargets(Vec<AgentId>),
    #[error("agents [{}] have target positions but are not boundary agents", join_ids(.0))]
    UnexpectedBoundaryTargets(Vec<AgentId>),
    #[error("boundary targets do not form a non-degenerate convex polygon in hull order")]
    DegenerateTargets,
    #[error("follower {id}: desired simplex is degenerate (area {area:e} m²)")]
    SingularSimplex { id: AgentId, area: f64 },
    #[error("follower {id}: {source}")]
    Region { id: AgentId, source: HeatMapError },
    #[error("follower {id} is missing in-neighbor positions")]
    MissingNeighbor { id: AgentId },
}

/// Desired planar positions of every agent plus each follower's desired simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredConfiguration {
    pub positions: BTreeMap<AgentId, Vec2>,
    /// Desired positions of each follower's in-neighbors, in neighbor order.
    pub simplices: BTreeMap<AgentId, [Vec2; 3]>,
}

impl DesiredConfiguration {
    pub fn position(&self, id: AgentId) -> Option<Vec2> {
        self.positions.get(&id).copied()
    }
}

fn check_targets(
    graph: &LayeredGraph,
    targets: &BTreeMap<AgentId, Vec2>,
) -> Result<Vec<Vec2>, PlanError> {
    let missing: Vec<AgentId> = graph
        .boundary_ids
        .iter()
        .filter(|id| !targets.contains_key(id))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(PlanError::MissingBoundaryTargets(missing));
    }
    let extra: Vec<AgentId> = targets
        .keys()
        .filter(|id| !graph.boundary_ids.contains(id))
        .copied()
        .collect();
    if !extra.is_empty() {
        return Err(PlanError::UnexpectedBoundaryTargets(extra));
    }
    let polygon: Vec<Vec2> = graph.boundary_ids.iter().map(|id| targets[id]).collect();
    if !polygon.iter().all(|p| p.x.is_finite() && p.y.is_finite())
        || !is_strictly_convex_ccw(&polygon)
    {
        return Err(PlanError::DegenerateTargets);
    }
    Ok(polygon)
}

/// One sweep over the layers.
///
/// Boundary agents take their targets, the core takes the targets' mean, and
/// each follower takes the density-weighted centroid of the triangle spanned
/// by its in-neighbors' desired positions.
pub fn forward_pass<D: Density + ?Sized>(
    graph: &LayeredGraph,
    density: &D,
    boundary_targets: &BTreeMap<AgentId, Vec2>,
    quad_tol: f64,
) -> Result<DesiredConfiguration, PlanError> {
    let polygon = check_targets(graph, boundary_targets)?;
    let mut positions: BTreeMap<AgentId, Vec2> = boundary_targets.clone();
    positions.insert(graph.core_id, vertex_mean(&polygon));
    let mut simplices = BTreeMap::new();

    for layer in graph.layers.iter().skip(1) {
        let placed: Vec<(AgentId, [Vec2; 3], Vec2)> = layer
            .par_iter()
            .map(|&id| {
                let ids = graph
                    .simplex(id)
                    .ok_or(PlanError::MissingNeighbor { id })?;
                let verts = ids
                    .iter()
                    .map(|n| positions.get(n).copied())
                    .collect::<Option<Vec<Vec2>>>()
                    .ok_or(PlanError::MissingNeighbor { id })?;
                let verts = [verts[0], verts[1], verts[2]];
                let p = weighted_centroid(id, density, verts, quad_tol)?;
                Ok((id, verts, p))
            })
            .collect::<Result<_, PlanError>>()?;
        for (id, verts, p) in placed {
            positions.insert(id, p);
            simplices.insert(id, verts);
        }
    }

    Ok(DesiredConfiguration {
        positions,
        simplices,
    })
}

fn weighted_centroid<D: Density + ?Sized>(
    id: AgentId,
    density: &D,
    verts: [Vec2; 3],
    quad_tol: f64,
) -> Result<Vec2, PlanError> {
    let area = signed_area(verts[0], verts[1], verts[2]);
    if !(area.abs() > MIN_SIMPLEX_AREA) {
        return Err(PlanError::SingularSimplex { id, area });
    }
    let ccw = if area > 0.0 {
        verts
    } else {
        [verts[0], verts[2], verts[1]]
    };
    let m = integrate_polygon(density, &ccw, quad_tol)
        .map_err(|source| PlanError::Region { id, source })?;
    Ok(if m.mass < ZERO_MASS {
        vertex_mean(&verts)
    } else {
        m.first_moment / m.mass
    })
}

/// Weights expressing each follower's desired position in its desired simplex.
pub fn final_weights(
    desired: &DesiredConfiguration,
    graph: &LayeredGraph,
) -> Result<BTreeMap<AgentId, WeightTriple>, PlanError> {
    graph
        .followers()
        .map(|id| {
            let neighbors = graph.simplex(id).ok_or(PlanError::MissingNeighbor { id })?;
            simplex_weights(id, neighbors, |n| desired.position(n))
        })
        .collect()
}

/// Weights expressing each follower's reference position in its reference simplex.
pub fn initial_weights(
    config: &ReferenceConfiguration,
    graph: &LayeredGraph,
) -> Result<BTreeMap<AgentId, WeightTriple>, PlanError> {
    graph
        .followers()
        .map(|id| {
            let neighbors = graph.simplex(id).ok_or(PlanError::MissingNeighbor { id })?;
            simplex_weights(id, neighbors, |n| config.position(n))
        })
        .collect()
}

fn simplex_weights(
    id: AgentId,
    neighbors: [AgentId; 3],
    position: impl Fn(AgentId) -> Option<Vec2>,
) -> Result<(AgentId, WeightTriple), PlanError> {
    let p = position(id).ok_or(PlanError::MissingNeighbor { id })?;
    let verts = neighbors
        .iter()
        .map(|&n| position(n))
        .collect::<Option<Vec<Vec2>>>()
        .ok_or(PlanError::MissingNeighbor { id })?;
    let tri = [verts[0], verts[1], verts[2]];
    let w = solve_simplex_weights(p, tri).map_err(|e| match e {
        WeightError::SingularSimplex { area } => PlanError::SingularSimplex { id, area },
        other => PlanError::Weights(other),
    })?;
    Ok((
        id,
        WeightTriple {
            neighbors,
            values: w.values,
        },
    ))
}

/// Everything the team needs to fly: graph, desired positions, weight schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub graph: LayeredGraph,
    pub desired: DesiredConfiguration,
    pub schedule: WeightSchedule,
}

impl Plan {
    /// Number of agents.
    pub fn len(&self) -> usize {
        self.desired.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.desired.positions.is_empty()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.graph.layers.iter().map(Vec::len).collect()
    }
}

/// Builds the graph, runs the forward pass and assembles the weight schedule.
pub fn plan<D: Density + ?Sized>(
    config: &ReferenceConfiguration,
    density: &D,
    boundary_targets: &BTreeMap<AgentId, Vec2>,
    t0: f64,
    tf: f64,
    quad_tol: f64,
) -> Result<Plan, PlanError> {
    let graph = LayeredGraph::build(config)?;
    let omega = initial_weights(config, &graph)?;
    let desired = forward_pass(&graph, density, boundary_targets, quad_tol)?;
    let varpi = final_weights(&desired, &graph)?;
    let schedule = WeightSchedule::new(t0, tf, &omega, &varpi)?;
    Ok(Plan {
        graph,
        desired,
        schedule,
    })
}
