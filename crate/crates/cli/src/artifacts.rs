//! Machine artifacts: plan JSON, trajectory CSV, metrics JSON.

use dnncov::formation::validate_dnn;
use dnncov::planner::{DesiredConfiguration, Plan};
use dnncov::sim::{Metrics, Sample, Trajectory};
use dnncov::weights::{FollowerWeights, WeightSchedule};
use dnncov::{AgentId, LayeredGraph, ReferenceConfiguration, Vec2, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use thiserror::Error;

/// Tolerance on the unit sum of stored weight triples.
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("malformed plan: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent plan: {0}")]
    Inconsistent(String),
    #[error("trajectory: {0}")]
    Csv(#[from] csv::Error),
    #[error("trajectory: {0}")]
    Trajectory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEntry {
    pub id: AgentId,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub id: AgentId,
    pub neighbors: [AgentId; 3],
    pub values: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaWindow {
    pub t0: f64,
    pub tf: f64,
}

/// On-disk plan layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub scenario_hash: String,
    pub agents: usize,
    pub layer_sizes: Vec<usize>,
    pub graph: LayeredGraph,
    pub desired_positions: Vec<PositionEntry>,
    pub omega: Vec<WeightEntry>,
    pub varpi: Vec<WeightEntry>,
    pub beta: BetaWindow,
}

impl PlanDocument {
    pub fn new(plan: &Plan, scenario_hash: &str) -> Self {
        let entries = |pick: fn(&FollowerWeights) -> [f64; 3]| {
            plan.schedule
                .followers()
                .iter()
                .map(|(&id, fw)| WeightEntry {
                    id,
                    neighbors: fw.neighbors,
                    values: pick(fw),
                })
                .collect()
        };
        Self {
            scenario_hash: scenario_hash.to_string(),
            agents: plan.len(),
            layer_sizes: plan.layer_sizes(),
            graph: plan.graph.clone(),
            desired_positions: plan
                .desired
                .positions
                .iter()
                .map(|(&id, &position)| PositionEntry { id, position })
                .collect(),
            omega: entries(|fw| fw.omega),
            varpi: entries(|fw| fw.varpi),
            beta: BetaWindow {
                t0: plan.schedule.t0(),
                tf: plan.schedule.tf(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(src: &str) -> Result<Self, ArtifactError> {
        Ok(serde_json::from_str(src)?)
    }

    /// Rebuilds the in-memory plan, checking it against the formation.
    pub fn to_plan(&self, reference: &ReferenceConfiguration) -> Result<Plan, ArtifactError> {
        let bad = |m: String| ArtifactError::Inconsistent(m);
        let report = validate_dnn(&self.graph, reference);
        if !report.is_valid() {
            return Err(bad(format!("graph does not fit the formation: {report}")));
        }
        let positions: BTreeMap<AgentId, Vec2> = self
            .desired_positions
            .iter()
            .map(|e| (e.id, e.position))
            .collect();
        if positions.len() != reference.len() || reference.ids().any(|id| !positions.contains_key(&id)) {
            return Err(bad("desired positions do not cover exactly the formation's agents".into()));
        }
        if self.agents != positions.len() {
            return Err(bad(format!("agent count {} disagrees with {} positions", self.agents, positions.len())));
        }
        let sizes: Vec<usize> = self.graph.layers.iter().map(Vec::len).collect();
        if sizes != self.layer_sizes {
            return Err(bad("layer sizes disagree with the graph".into()));
        }

        let omega: BTreeMap<AgentId, &WeightEntry> = self.omega.iter().map(|e| (e.id, e)).collect();
        let mut followers = BTreeMap::new();
        let mut simplices = BTreeMap::new();
        for v in &self.varpi {
            let o = omega
                .get(&v.id)
                .ok_or_else(|| bad(format!("follower {} has final but no initial weights", v.id)))?;
            let expected = self
                .graph
                .simplex(v.id)
                .ok_or_else(|| bad(format!("agent {} has weights but no simplex", v.id)))?;
            if o.neighbors != expected || v.neighbors != expected {
                return Err(bad(format!("follower {}: weight neighbors disagree with the graph", v.id)));
            }
            for values in [o.values, v.values] {
                let sum: f64 = values.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL || values.iter().any(|w| !w.is_finite()) {
                    return Err(bad(format!("follower {}: weights sum to {sum}", v.id)));
                }
            }
            followers.insert(
                v.id,
                FollowerWeights {
                    neighbors: expected,
                    omega: o.values,
                    varpi: v.values,
                },
            );
            simplices.insert(v.id, expected.map(|n| positions[&n]));
        }
        if followers.len() != self.omega.len() || self.graph.followers().count() != followers.len() {
            return Err(bad("weight lists do not match the follower set".into()));
        }
        let schedule = WeightSchedule::from_followers(self.beta.t0, self.beta.tf, followers)
            .map_err(|e| bad(e.to_string()))?;
        Ok(Plan {
            graph: self.graph.clone(),
            desired: DesiredConfiguration {
                positions,
                simplices,
            },
            schedule,
        })
    }
}

pub const CSV_HEADER: [&str; 12] = ["t", "agent_id", "x", "y", "z", "xd", "yd", "zd", "phi", "theta", "psi", "f"];

/// Writes one row per logged time and agent, in time then id order.
pub fn write_trajectory_csv(traj: &Trajectory, out: impl Write) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (t, row) in traj.times.iter().zip(&traj.samples) {
        let t = format!("{t:.6}");
        for (id, s) in traj.ids.iter().zip(row) {
            let fields = [
                s.position.x,
                s.position.y,
                s.position.z,
                s.desired.x,
                s.desired.y,
                s.desired.z,
                s.attitude.x,
                s.attitude.y,
                s.attitude.z,
                s.thrust,
            ];
            let mut rec = Vec::with_capacity(12);
            rec.push(t.clone());
            rec.push(id.to_string());
            rec.extend(fields.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    t: f64,
    agent_id: u32,
    x: f64,
    y: f64,
    z: f64,
    xd: f64,
    yd: f64,
    zd: f64,
    phi: f64,
    theta: f64,
    psi: f64,
    f: f64,
}

/// Reads a trajectory log back; rows must be grouped by time with the same
/// agents in the same order at every time.
pub fn read_trajectory_csv(input: impl Read) -> Result<Trajectory, ArtifactError> {
    let bad = |m: String| ArtifactError::Trajectory(m);
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(bad(format!("unexpected header {}", header.join(","))));
    }
    let mut ids: Vec<AgentId> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut samples: Vec<Vec<Sample>> = Vec::new();
    for (line, row) in r.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        let sample = Sample {
            position: Vec3::new(row.x, row.y, row.z),
            desired: Vec3::new(row.xd, row.yd, row.zd),
            attitude: Vec3::new(row.phi, row.theta, row.psi),
            thrust: row.f,
        };
        let id = AgentId(row.agent_id);
        if times.last() != Some(&row.t) {
            if let Some(prev) = samples.last() {
                if prev.len() != ids.len() {
                    return Err(bad(format!("time {} has {} agents, expected {}", times.last().unwrap(), prev.len(), ids.len())));
                }
            }
            if times.last().is_some_and(|&p| row.t <= p) {
                return Err(bad(format!("row {}: time {} is not increasing", line + 2, row.t)));
            }
            times.push(row.t);
            samples.push(Vec::new());
        }
        let current = samples.last_mut().unwrap();
        if times.len() == 1 {
            if ids.last().is_some_and(|&p| id <= p) {
                return Err(bad(format!("row {}: agent ids must increase within a time", line + 2)));
            }
            ids.push(id);
        } else if ids.get(current.len()) != Some(&id) {
            return Err(bad(format!("row {}: unexpected agent {id}", line + 2)));
        }
        current.push(sample);
    }
    if samples.last().is_some_and(|s| s.len() != ids.len()) {
        return Err(bad("last time is incomplete".into()));
    }
    if times.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(Trajectory { ids, times, samples })
}

#[derive(Debug, Clone, Serialize)]
struct PairJson {
    a: AgentId,
    b: AgentId,
    t: f64,
    planar_distance: f64,
    vertical_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
struct MetricsJson<'a> {
    scenario_hash: &'a str,
    agents: usize,
    layers: usize,
    t_end: f64,
    dt: f64,
    final_deviation: f64,
    worst_final_agent: Option<AgentId>,
    max_tracking_error: f64,
    closest_pair: Option<PairJson>,
    separation_flag: bool,
    settling_times: &'a BTreeMap<AgentId, Option<f64>>,
}

pub struct RunInfo<'a> {
    pub scenario_hash: &'a str,
    pub layers: usize,
    pub t_end: f64,
    pub dt: f64,
}

pub fn metrics_json(m: &Metrics, info: &RunInfo<'_>) -> String {
    let doc = MetricsJson {
        scenario_hash: info.scenario_hash,
        agents: m.settling_times.len(),
        layers: info.layers,
        t_end: info.t_end,
        dt: info.dt,
        final_deviation: m.final_deviation,
        worst_final_agent: m.worst_final_agent,
        max_tracking_error: m.max_tracking_error,
        closest_pair: m.closest_pair.as_ref().map(|c| PairJson {
            a: c.a,
            b: c.b,
            t: c.t,
            planar_distance: c.planar_distance,
            vertical_gap: c.vertical_gap,
        }),
        separation_flag: m.separation_flag,
        settling_times: &m.settling_times,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("metrics always serialize");
    s.push('\n');
    s
}
