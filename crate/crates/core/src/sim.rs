//! Team simulation under the time-varying containment law.
//!
//! Every tick takes a snapshot of all positions, derives each agent's desired
//! position from it (leaders follow their blended path, followers the
//! weighted combination of their in-neighbors), computes the tracking input
//! and advances every vehicle by one RK4 step with that input held.

use crate::formation::{LayeredGraph, ReferenceConfiguration};
use crate::planner::Plan;
use crate::quadcopter::{ControllerGains, FlatState, QuadError, QuadState, Quadcopter, MAX_STEP};
use crate::weights::WeightError;
use crate::{AgentId, Vec2, Vec3};
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// Position norm (m) beyond which a vehicle counts as diverged.
pub const DIVERGENCE_RADIUS: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time step {0} s must lie in (0, {MAX_STEP}]")]
    TimeStep(f64),
    #[error("end time {t_end} s precedes the end of the weight blend {tf} s")]
    Horizon { t_end: f64, tf: f64 },
    #[error("agent {id} has altitude {z} m; altitudes must be positive")]
    Altitude { id: AgentId, z: f64 },
    #[error("agent {0} has no altitude")]
    MissingAltitude(AgentId),
    #[error("plan and formation disagree about agent {0}")]
    PlanMismatch(AgentId),
    #[error("agent {id}: in-neighbor {neighbor} has no position")]
    MissingNeighbor { id: AgentId, neighbor: AgentId },
    #[error("agent {id} diverged at t = {t} s")]
    Diverged { id: AgentId, t: f64 },
    #[error("agent {id} at t = {t} s: {source}")]
    Vehicle { id: AgentId, t: f64, source: QuadError },
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("log stride must be at least 1")]
    LogStride,
}

/// Altitude `base + step·l` for an agent in layer `l`.
pub fn layered_altitudes(graph: &LayeredGraph, base: f64, step: f64) -> BTreeMap<AgentId, f64> {
    graph
        .layer_index()
        .into_iter()
        .map(|(id, l)| (id, base + step * l as f64))
        .collect()
}

/// Everything one simulation run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Where each agent starts at rest; leaders blend from here to their
    /// desired positions.
    pub start: BTreeMap<AgentId, Vec2>,
    pub plan: Plan,
    pub vehicle: Quadcopter,
    pub gains: ControllerGains,
    pub altitudes: BTreeMap<AgentId, f64>,
    pub dt: f64,
    pub t_end: f64,
    /// Log every `log_stride`-th tick.
    pub log_stride: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt <= MAX_STEP) {
            return Err(SimError::TimeStep(self.dt));
        }
        let tf = self.plan.schedule.tf();
        if !(self.t_end >= tf) {
            return Err(SimError::Horizon {
                t_end: self.t_end,
                tf,
            });
        }
        if self.log_stride == 0 {
            return Err(SimError::LogStride);
        }
        for &id in self.start.keys() {
            if !self.plan.desired.positions.contains_key(&id) {
                return Err(SimError::PlanMismatch(id));
            }
            let z = *self
                .altitudes
                .get(&id)
                .ok_or(SimError::MissingAltitude(id))?;
            if !(z > 0.0 && z.is_finite()) {
                return Err(SimError::Altitude { id, z });
            }
        }
        if let Some(&id) = self
            .plan
            .desired
            .positions
            .keys()
            .find(|&&id| !self.start.contains_key(&id))
        {
            return Err(SimError::PlanMismatch(id));
        }
        Ok(())
    }

    /// Start positions taken from a reference formation.
    pub fn start_from(reference: &ReferenceConfiguration) -> BTreeMap<AgentId, Vec2> {
        reference.agents().iter().map(|a| (a.id, a.position)).collect()
    }

    /// The same team started at rest on its desired positions, already
    /// using the final weights.
    pub fn at_equilibrium(&self) -> Self {
        let mut plan = self.plan.clone();
        plan.schedule = plan.schedule.settled();
        Self {
            start: plan.desired.positions.clone(),
            plan,
            ..self.clone()
        }
    }
}

/// Desired position of agent `id` at time `t`.
///
/// Leaders move along `(1 − β)·a + β·p`; followers aim at
/// `Σ w(t)·r_j` over their in-neighbors' current planar positions.
pub fn desired_input(
    id: AgentId,
    t: f64,
    positions: impl Fn(AgentId) -> Option<Vec2>,
    plan: &Plan,
    start: &BTreeMap<AgentId, Vec2>,
    altitude: f64,
) -> Result<Vec3, SimError> {
    let planar = match plan.schedule.follower(id) {
        Some(_) => {
            let w = plan.schedule.weight_at(t, id)?;
            let mut acc = Vec2::zeros();
            for (n, wk) in w.neighbors.iter().zip(w.values) {
                let r = positions(*n).ok_or(SimError::MissingNeighbor { id, neighbor: *n })?;
                acc += wk * r;
            }
            acc
        }
        None => {
            let a = *start.get(&id).ok_or(SimError::PlanMismatch(id))?;
            let p = plan.desired.position(id).ok_or(SimError::PlanMismatch(id))?;
            let b = plan.schedule.beta(t)?;
            if b >= 1.0 {
                p
            } else {
                (1.0 - b) * a + b * p
            }
        }
    };
    Ok(Vec3::new(planar.x, planar.y, altitude))
}

/// One logged agent record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub position: Vec3,
    pub desired: Vec3,
    /// Roll, pitch, yaw.
    pub attitude: Vec3,
    pub thrust: f64,
}

/// Logged run: `samples[k][i]` is agent `ids[i]` at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub ids: Vec<AgentId>,
    pub times: Vec<f64>,
    pub samples: Vec<Vec<Sample>>,
}

impl Trajectory {
    pub fn agent_index(&self, id: AgentId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn final_samples(&self) -> &[Sample] {
        self.samples.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Index of the logged time closest to `t`, if `t` lies within the log.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        let slack = 1e-9 * (1.0 + last.abs());
        if t < first - slack || t > last + slack {
            return None;
        }
        let k = self.times.partition_point(|&x| x < t);
        let candidates = [k.saturating_sub(1), k.min(self.times.len() - 1)];
        candidates
            .into_iter()
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
    }
}

struct Agent {
    id: AgentId,
    altitude: f64,
}

/// Runs the team from its start positions (at rest, level, hovering at
/// the assigned altitudes) until `t_end`.
pub fn run(scenario: &Scenario) -> Result<Trajectory, SimError> {
    scenario.validate()?;
    let agents: Vec<Agent> = scenario
        .start
        .keys()
        .map(|&id| Agent {
            id,
            altitude: scenario.altitudes[&id],
        })
        .collect();
    let ids: Vec<AgentId> = agents.iter().map(|a| a.id).collect();
    let vehicle = &scenario.vehicle;
    let mut states: Vec<QuadState> = agents
        .iter()
        .map(|a| {
            let p = scenario.start[&a.id];
            vehicle.hover(Vec3::new(p.x, p.y, a.altitude))
        })
        .collect();

    let t0 = scenario.plan.schedule.t0();
    let ticks = ((scenario.t_end - t0) / scenario.dt).round() as usize;
    let mut times = Vec::new();
    let mut samples = Vec::new();

    for k in 0..=ticks {
        let t = t0 + k as f64 * scenario.dt;
        let snapshot: Vec<Vec2> = states.iter().map(|s| s.position().xy()).collect();
        let lookup = |id: AgentId| ids.binary_search(&id).ok().map(|i| snapshot[i]);

        let desired: Vec<Vec3> = agents
            .par_iter()
            .map(|a| desired_input(a.id, t, lookup, &scenario.plan, &scenario.start, a.altitude))
            .collect::<Result<_, _>>()?;

        if k % scenario.log_stride == 0 || k == ticks {
            times.push(t);
            samples.push(
                states
                    .iter()
                    .zip(&desired)
                    .map(|(s, d)| Sample {
                        position: s.position(),
                        desired: *d,
                        attitude: s.attitude(),
                        thrust: s.thrust(),
                    })
                    .collect(),
            );
        }
        if k == ticks {
            break;
        }

        states = states
            .par_iter()
            .zip(&desired)
            .zip(&agents)
            .map(|((s, d), a)| {
                let wrap = |source| SimError::Vehicle { id: a.id, t, source };
                let target = FlatState::at_rest(*d, 0.0);
                let u = scenario.gains.control(vehicle, s, &target).map_err(wrap)?;
                let next = vehicle.step(s, &u, scenario.dt).map_err(|e| match e {
                    QuadError::NonFinite { .. } => SimError::Diverged { id: a.id, t },
                    other => wrap(other),
                })?;
                if next.position().norm() > DIVERGENCE_RADIUS {
                    return Err(SimError::Diverged { id: a.id, t });
                }
                Ok(next)
            })
            .collect::<Result<_, _>>()?;
    }

    Ok(Trajectory {
        ids,
        times,
        samples,
    })
}

/// Thresholds used when summarizing a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    /// Planar distance to the desired position (m) inside which an agent
    /// counts as settled.
    pub settle_band: f64,
    /// Planar separation (m) below which a pair is flagged.
    pub safety_distance: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            settle_band: 0.05,
            safety_distance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosestPair {
    pub a: AgentId,
    pub b: AgentId,
    pub t: f64,
    pub planar_distance: f64,
    /// Altitude difference at that moment, m.
    pub vertical_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Largest `‖r_i − r_i,d‖` over agents and logged times.
    pub max_tracking_error: f64,
    /// Largest planar `‖r_i(t_end) − p_i‖`.
    pub final_deviation: f64,
    pub worst_final_agent: Option<AgentId>,
    /// Closest planar approach between any two agents.
    pub closest_pair: Option<ClosestPair>,
    /// Set when the closest planar approach is below the safety distance.
    pub separation_flag: bool,
    /// First logged time after which the agent stays within the settle band
    /// of its desired position; `None` if it never does.
    pub settling_times: BTreeMap<AgentId, Option<f64>>,
}

pub fn metrics(traj: &Trajectory, plan: &Plan, config: &MetricsConfig) -> Metrics {
    let mut max_tracking_error: f64 = 0.0;
    let mut closest: Option<ClosestPair> = None;
    for (k, row) in traj.samples.iter().enumerate() {
        for (i, s) in row.iter().enumerate() {
            max_tracking_error = max_tracking_error.max((s.position - s.desired).norm());
            for (j, o) in row.iter().enumerate().skip(i + 1) {
                let d = (s.position.xy() - o.position.xy()).norm();
                if closest.as_ref().is_none_or(|c| d < c.planar_distance) {
                    closest = Some(ClosestPair {
                        a: traj.ids[i],
                        b: traj.ids[j],
                        t: traj.times[k],
                        planar_distance: d,
                        vertical_gap: (s.position.z - o.position.z).abs(),
                    });
                }
            }
        }
    }

    let mut final_deviation = 0.0;
    let mut worst_final_agent = None;
    let mut settling_times = BTreeMap::new();
    for (i, &id) in traj.ids.iter().enumerate() {
        let Some(p) = plan.desired.position(id) else {
            continue;
        };
        if let Some(last) = traj.samples.last() {
            let d = (last[i].position.xy() - p).norm();
            if d > final_deviation || worst_final_agent.is_none() {
                final_deviation = d;
                worst_final_agent = Some(id);
            }
        }
        let mut settled_at = None;
        for (k, row) in traj.samples.iter().enumerate() {
            if (row[i].position.xy() - p).norm() <= config.settle_band {
                settled_at.get_or_insert(traj.times[k]);
            } else {
                settled_at = None;
            }
        }
        settling_times.insert(id, settled_at);
    }

    let separation_flag = closest
        .as_ref()
        .is_some_and(|c| c.planar_distance < config.safety_distance);
    Metrics {
        max_tracking_error,
        final_deviation,
        worst_final_agent,
        closest_pair: closest,
        separation_flag,
        settling_times,
    }
}
