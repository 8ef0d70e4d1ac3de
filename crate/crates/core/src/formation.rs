//! Layered communication graph built from a reference formation.
//!
//! Boundary agents sit on the corners of the formation's convex hull. Together
//! with the core agent (the interior agent closest, in summed distance, to all
//! boundary agents) they form layer 0, the leaders. Every other agent is a
//! follower that listens to exactly three agents of earlier layers whose
//! triangle strictly encloses its reference position.

use crate::geometry::{self, signed_area};
use crate::weights::{solve_simplex_weights, MIN_SIMPLEX_AREA};
use crate::{join_ids, AgentId, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Smallest barycentric coordinate a follower may have in its simplex.
pub const INTERIOR_MARGIN: f64 = 1e-6;
/// Reference positions closer than this (m) are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormationError {
    #[error("agent id {0} appears more than once")]
    DuplicateId(AgentId),
    #[error("formation needs at least 4 agents, got {0}")]
    TooFewAgents(usize),
    #[error("agents {0} and {1} share a reference position")]
    CoincidentPositions(AgentId, AgentId),
    #[error("agent {id} has a non-finite reference position")]
    NonFinite { id: AgentId },
    #[error("reference positions are collinear; the convex hull has no area")]
    DegenerateHull,
    #[error("declared boundary [{declared}] differs from the hull corners [{hull}]")]
    BoundaryMismatch { declared: String, hull: String },
    #[error("no interior agent is available to act as core leader")]
    NoInteriorAgent,
    #[error("no enclosing communication simplex exists for agents [{}]", join_ids(.0))]
    Infeasible(Vec<AgentId>),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub position: Vec2,
}

/// Agents with their reference positions, ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfiguration {
    agents: Vec<Agent>,
    declared_boundary: Option<Vec<AgentId>>,
}

impl ReferenceConfiguration {
    pub fn new(
        mut agents: Vec<Agent>,
        declared_boundary: Option<Vec<AgentId>>,
    ) -> Result<Self, FormationError> {
        agents.sort_by_key(|a| a.id);
        if let Some(w) = agents.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(FormationError::DuplicateId(w[0].id));
        }
        if agents.len() < 4 {
            return Err(FormationError::TooFewAgents(agents.len()));
        }
        if let Some(a) = agents
            .iter()
            .find(|a| !(a.position.x.is_finite() && a.position.y.is_finite()))
        {
            return Err(FormationError::NonFinite { id: a.id });
        }
        for (i, a) in agents.iter().enumerate() {
            for b in &agents[i + 1..] {
                if (a.position - b.position).norm() <= MIN_SEPARATION {
                    return Err(FormationError::CoincidentPositions(a.id, b.id));
                }
            }
        }
        if let Some(ids) = &declared_boundary {
            if let Some(&id) = ids
                .iter()
                .find(|id| agents.binary_search_by_key(*id, |a| a.id).is_err())
            {
                return Err(FormationError::UnknownAgent(id));
            }
        }
        Ok(Self {
            agents,
            declared_boundary,
        })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.iter().map(|a| a.id)
    }

    pub fn position(&self, id: AgentId) -> Option<Vec2> {
        self.agents
            .binary_search_by_key(&id, |a| a.id)
            .ok()
            .map(|k| self.agents[k].position)
    }

    pub fn declared_boundary(&self) -> Option<&[AgentId]> {
        self.declared_boundary.as_deref()
    }

    fn pos(&self, id: AgentId) -> Result<Vec2, FormationError> {
        self.position(id).ok_or(FormationError::UnknownAgent(id))
    }
}

/// Boundary agents (hull corners, counter-clockwise) and interior agents (by id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySplit {
    pub boundary: Vec<AgentId>,
    pub interior: Vec<AgentId>,
}

pub fn classify_boundary(config: &ReferenceConfiguration) -> Result<BoundarySplit, FormationError> {
    let points: Vec<Vec2> = config.agents.iter().map(|a| a.position).collect();
    let hull = geometry::convex_hull(&points).ok_or(FormationError::DegenerateHull)?;
    let boundary: Vec<AgentId> = hull.iter().map(|&k| config.agents[k].id).collect();
    let on_hull: BTreeSet<AgentId> = boundary.iter().copied().collect();

    if let Some(declared) = config.declared_boundary() {
        let declared_set: BTreeSet<AgentId> = declared.iter().copied().collect();
        if declared_set != on_hull || declared_set.len() != declared.len() {
            return Err(FormationError::BoundaryMismatch {
                declared: join_ids(declared),
                hull: join_ids(&on_hull.into_iter().collect::<Vec<_>>()),
            });
        }
    }

    let interior = config
        .ids()
        .filter(|id| !on_hull.contains(id))
        .collect();
    Ok(BoundarySplit { boundary, interior })
}

/// Interior agent with the smallest summed distance to the boundary agents.
///
/// Sums equal to within 1e-12 relative count as ties and go to the smaller id.
pub fn select_core_leader(
    boundary: &[AgentId],
    interior: &[AgentId],
    config: &ReferenceConfiguration,
) -> Result<AgentId, FormationError> {
    let corners = boundary
        .iter()
        .map(|&id| config.pos(id))
        .collect::<Result<Vec<_>, _>>()?;
    let mut candidates = interior.to_vec();
    candidates.sort();
    let mut best: Option<(AgentId, f64)> = None;
    for id in candidates {
        let p = config.pos(id)?;
        let total: f64 = corners.iter().map(|c| (c - p).norm()).sum();
        match best {
            Some((_, b)) if total >= b - 1e-12 * b.abs().max(1.0) => {}
            _ => best = Some((id, total)),
        }
    }
    best.map(|(id, _)| id).ok_or(FormationError::NoInteriorAgent)
}

/// The layered communication graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredGraph {
    /// Hull corners in counter-clockwise order.
    pub boundary_ids: Vec<AgentId>,
    pub core_id: AgentId,
    /// Layer 0 holds the leaders; each layer is sorted by id.
    pub layers: Vec<Vec<AgentId>>,
    /// In-neighbors of every follower, ascending by id. Leaders are absent.
    pub in_neighbors: BTreeMap<AgentId, Vec<AgentId>>,
}

impl LayeredGraph {
    /// Classifies the boundary, picks the core and assigns every follower a simplex.
    pub fn build(config: &ReferenceConfiguration) -> Result<Self, FormationError> {
        let split = classify_boundary(config)?;
        let core = select_core_leader(&split.boundary, &split.interior, config)?;
        build_layers(config, &split.boundary, core)
    }

    /// Index `M` of the deepest layer.
    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn leaders(&self) -> &[AgentId] {
        self.layers.first().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_leader(&self, id: AgentId) -> bool {
        self.leaders().contains(&id)
    }

    pub fn layer_of(&self, id: AgentId) -> Option<usize> {
        self.layers.iter().position(|layer| layer.contains(&id))
    }

    pub fn layer_index(&self) -> BTreeMap<AgentId, usize> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.iter().map(move |&id| (id, l)))
            .collect()
    }

    /// The follower's neighbor triple, if it has exactly three in-neighbors.
    pub fn simplex(&self, id: AgentId) -> Option<[AgentId; 3]> {
        self.in_neighbors
            .get(&id)
            .and_then(|n| <[AgentId; 3]>::try_from(n.as_slice()).ok())
    }

    /// Agents available as in-neighbors to layer `l + 1`: layers `0..=l`,
    /// except that the deepest layer stands alone.
    pub fn cumulative(&self, l: usize) -> Vec<AgentId> {
        let mut ids: Vec<AgentId> = if l == self.depth() && l > 0 {
            self.layers[l].clone()
        } else {
            self.layers[..=l].iter().flatten().copied().collect()
        };
        ids.sort();
        ids
    }

    /// Neurons of layer `l - 1` feeding each member of the cumulative set of
    /// layer `l`: a follower of layer `l` is fed by its in-neighbors, every
    /// earlier agent by itself.
    pub fn connections(&self, l: usize) -> BTreeMap<AgentId, Vec<AgentId>> {
        assert!(l >= 1 && l <= self.depth(), "layer {l} has no connections");
        self.cumulative(l)
            .into_iter()
            .map(|id| {
                let feed = if self.layers[l].contains(&id) {
                    self.in_neighbors.get(&id).cloned().unwrap_or_default()
                } else {
                    vec![id]
                };
                (id, feed)
            })
            .collect()
    }

    pub fn followers(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.layers.iter().skip(1).flatten().copied()
    }
}

struct Candidate {
    ids: [AgentId; 3],
    verts: [Vec2; 3],
    area: f64,
}

/// Greedy layer assignment: layer `l` takes every unassigned follower that a
/// triangle of agents in layers `0..l` strictly encloses. Among enclosing
/// triangles the smallest area wins, then the lexicographically smallest id
/// triple.
pub fn build_layers(
    config: &ReferenceConfiguration,
    boundary: &[AgentId],
    core: AgentId,
) -> Result<LayeredGraph, FormationError> {
    let mut leaders: Vec<AgentId> = boundary.to_vec();
    leaders.push(core);
    leaders.sort();
    leaders.dedup();
    for &id in &leaders {
        config.pos(id)?;
    }

    let mut pending: Vec<AgentId> = config
        .ids()
        .filter(|id| leaders.binary_search(id).is_err())
        .collect();
    let mut available = leaders.clone();
    let mut layers = vec![leaders];
    let mut in_neighbors = BTreeMap::new();

    while !pending.is_empty() {
        let candidates = enumerate_triangles(config, &available);
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for id in pending {
            let p = config.pos(id)?;
            let found = candidates.iter().find(|c| {
                solve_simplex_weights(p, c.verts)
                    .map(|w| w.min() >= INTERIOR_MARGIN)
                    .unwrap_or(false)
            });
            match found {
                Some(c) => {
                    in_neighbors.insert(id, c.ids.to_vec());
                    layer.push(id);
                }
                None => rest.push(id),
            }
        }
        if layer.is_empty() {
            return Err(FormationError::Infeasible(rest));
        }
        available.extend_from_slice(&layer);
        available.sort();
        layers.push(layer);
        pending = rest;
    }

    Ok(LayeredGraph {
        boundary_ids: boundary.to_vec(),
        core_id: core,
        layers,
        in_neighbors,
    })
}

/// Every non-degenerate triangle over `ids`, ordered by area then id triple.
fn enumerate_triangles(config: &ReferenceConfiguration, ids: &[AgentId]) -> Vec<Candidate> {
    let pts: Vec<Vec2> = ids.iter().map(|&id| config.pos(id).unwrap()).collect();
    let n = ids.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let area = signed_area(pts[a], pts[b], pts[c]).abs();
                if area > MIN_SIMPLEX_AREA {
                    out.push(Candidate {
                        ids: [ids[a], ids[b], ids[c]],
                        verts: [pts[a], pts[b], pts[c]],
                        area,
                    });
                }
            }
        }
    }
    out.sort_by(|x, y| x.area.total_cmp(&y.area).then(x.ids.cmp(&y.ids)));
    out
}

/// One broken graph invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// An agent of the formation is in no layer.
    Unassigned(AgentId),
    /// An agent appears in more than one layer, or twice in one.
    Duplicated(AgentId),
    /// A layer names an agent the formation does not have.
    Unknown(AgentId),
    EmptyLayer(usize),
    /// Boundary ids differ from the hull corners of the formation.
    BoundaryMismatch {
        expected: Vec<AgentId>,
        found: Vec<AgentId>,
    },
    CoreNotInterior(AgentId),
    /// Layer 0 is not exactly the boundary agents plus the core.
    LeaderSetMismatch {
        expected: Vec<AgentId>,
        found: Vec<AgentId>,
    },
    LeaderHasNeighbors(AgentId),
    /// A follower does not listen to exactly three distinct agents.
    NeighborCount { id: AgentId, count: usize },
    /// A follower listens to an agent outside the layers before its own.
    LayerOrder {
        id: AgentId,
        layer: usize,
        neighbor: AgentId,
        neighbor_layer: Option<usize>,
    },
    /// A follower is not strictly inside its simplex.
    NotEnclosed { id: AgentId, min_weight: f64 },
    DegenerateSimplex(AgentId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            Unassigned(id) => write!(f, "agent {id} is not assigned to any layer"),
            Duplicated(id) => write!(f, "agent {id} is assigned more than once"),
            Unknown(id) => write!(f, "layer member {id} is not in the formation"),
            EmptyLayer(l) => write!(f, "layer {l} is empty"),
            BoundaryMismatch { expected, found } => write!(
                f,
                "boundary [{}] differs from hull corners [{}]",
                join_ids(found),
                join_ids(expected)
            ),
            CoreNotInterior(id) => write!(f, "core agent {id} is not an interior agent"),
            LeaderSetMismatch { expected, found } => write!(
                f,
                "leader layer [{}] should be boundary plus core [{}]",
                join_ids(found),
                join_ids(expected)
            ),
            LeaderHasNeighbors(id) => write!(f, "leader {id} has in-neighbors"),
            NeighborCount { id, count } => write!(
                f,
                "follower {id} has {count} distinct in-neighbors; exactly 3 are required"
            ),
            LayerOrder {
                id,
                layer,
                neighbor,
                neighbor_layer,
            } => match neighbor_layer {
                Some(nl) => write!(
                    f,
                    "follower {id} in layer {layer} listens to {neighbor} in layer {nl}"
                ),
                None => write!(
                    f,
                    "follower {id} in layer {layer} listens to unassigned agent {neighbor}"
                ),
            },
            NotEnclosed { id, min_weight } => write!(
                f,
                "follower {id} is not strictly inside its simplex (min weight {min_weight:e})"
            ),
            DegenerateSimplex(id) => write!(f, "follower {id} has a degenerate simplex"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "graph is valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Re-checks a graph against the formation it claims to describe.
pub fn validate_dnn(graph: &LayeredGraph, config: &ReferenceConfiguration) -> ValidationReport {
    let mut out = Vec::new();

    let mut layer_of: BTreeMap<AgentId, usize> = BTreeMap::new();
    for (l, layer) in graph.layers.iter().enumerate() {
        if layer.is_empty() {
            out.push(Violation::EmptyLayer(l));
        }
        for &id in layer {
            if config.position(id).is_none() {
                out.push(Violation::Unknown(id));
            }
            if layer_of.insert(id, l).is_some() {
                out.push(Violation::Duplicated(id));
            }
        }
    }
    for id in config.ids() {
        if !layer_of.contains_key(&id) {
            out.push(Violation::Unassigned(id));
        }
    }

    match classify_boundary(config) {
        Ok(split) => {
            let expected: BTreeSet<_> = split.boundary.iter().copied().collect();
            let found: BTreeSet<_> = graph.boundary_ids.iter().copied().collect();
            if expected != found || found.len() != graph.boundary_ids.len() {
                out.push(Violation::BoundaryMismatch {
                    expected: expected.into_iter().collect(),
                    found: graph.boundary_ids.clone(),
                });
            }
            if !split.interior.contains(&graph.core_id) {
                out.push(Violation::CoreNotInterior(graph.core_id));
            }
        }
        Err(_) => out.push(Violation::BoundaryMismatch {
            expected: Vec::new(),
            found: graph.boundary_ids.clone(),
        }),
    }

    let mut expected_leaders: Vec<AgentId> = graph.boundary_ids.clone();
    expected_leaders.push(graph.core_id);
    expected_leaders.sort();
    expected_leaders.dedup();
    let mut found_leaders = graph.leaders().to_vec();
    found_leaders.sort();
    if expected_leaders != found_leaders {
        out.push(Violation::LeaderSetMismatch {
            expected: expected_leaders,
            found: found_leaders,
        });
    }

    for &id in graph.leaders() {
        if graph.in_neighbors.get(&id).is_some_and(|n| !n.is_empty()) {
            out.push(Violation::LeaderHasNeighbors(id));
        }
    }

    for (l, layer) in graph.layers.iter().enumerate().skip(1) {
        for &id in layer {
            let neighbors = graph.in_neighbors.get(&id).cloned().unwrap_or_default();
            let distinct: BTreeSet<_> = neighbors.iter().copied().collect();
            if neighbors.len() != 3 || distinct.len() != 3 {
                out.push(Violation::NeighborCount {
                    id,
                    count: distinct.len(),
                });
            }
            for &n in &neighbors {
                let nl = layer_of.get(&n).copied();
                if nl.is_none_or(|nl| nl >= l) {
                    out.push(Violation::LayerOrder {
                        id,
                        layer: l,
                        neighbor: n,
                        neighbor_layer: nl,
                    });
                }
            }
            if neighbors.len() == 3 {
                let verts: Option<Vec<Vec2>> =
                    neighbors.iter().map(|&n| config.position(n)).collect();
                if let (Some(p), Some(verts)) = (config.position(id), verts) {
                    match solve_simplex_weights(p, [verts[0], verts[1], verts[2]]) {
                        Ok(w) if w.min() < INTERIOR_MARGIN => out.push(Violation::NotEnclosed {
                            id,
                            min_weight: w.min(),
                        }),
                        Ok(_) => {}
                        Err(_) => out.push(Violation::DegenerateSimplex(id)),
                    }
                }
            }
        }
    }
    for (&id, _) in graph.in_neighbors.iter() {
        if !layer_of.contains_key(&id) {
            out.push(Violation::Unassigned(id));
        }
    }

    ValidationReport { violations: out }
}
