//! Scenario files: TOML in, validated core types out.
//!
//! Every validation failure carries the 1-based line of the offending entry.

use dnncov::formation::{Agent, FormationError};
use dnncov::heatmap::{Application, GaussianTarget, HeatMap, HeatMapError, DEFAULT_QUAD_TOL};
use dnncov::quadcopter::{design_gains, ControllerGains, PoleSpec, Quadcopter, MAX_STEP};
use dnncov::sim::MetricsConfig;
use dnncov::{AgentId, LayeredGraph, ReferenceConfiguration, Vec2};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use toml::Spanned;

/// A scenario problem pinned to a line of the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    boundary: Option<Spanned<Vec<u32>>>,
    agents: Spanned<Vec<Spanned<RawAgent>>>,
    applications: Spanned<Vec<Spanned<RawApplication>>>,
    boundary_targets: Spanned<Vec<Spanned<RawTarget>>>,
    vehicle: Option<Spanned<RawVehicle>>,
    schedule: Spanned<RawSchedule>,
    altitude: Option<Spanned<RawAltitude>>,
    planner: Option<Spanned<RawPlanner>>,
    output: Option<Spanned<RawOutput>>,
    metrics: Option<Spanned<RawMetrics>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: u32,
    pos: [f64; 2],
    altitude: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApplication {
    alpha: f64,
    targets: Vec<Spanned<RawGaussian>>,
    /// Ground polygon, drawn but not used by the planner.
    zone: Option<Vec<[f64; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGaussian {
    pos: [f64; 2],
    cov: [[f64; 2]; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    id: u32,
    pos: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawVehicle {
    mass: f64,
    poles: [f64; 4],
    yaw_poles: [f64; 2],
    min_thrust: f64,
    attitude_margin: f64,
}

impl Default for RawVehicle {
    fn default() -> Self {
        let poles = PoleSpec::default();
        let quad = Quadcopter::new(1.0).expect("unit mass is valid");
        Self {
            mass: quad.mass,
            poles: poles.translational,
            yaw_poles: poles.yaw,
            min_thrust: quad.min_thrust,
            attitude_margin: quad.attitude_margin,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    t0: f64,
    tf: f64,
    t_end: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_stride")]
    log_stride: usize,
    #[serde(default)]
    start: StartMode,
}

fn default_dt() -> f64 {
    0.01
}

fn default_stride() -> usize {
    10
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawAltitude {
    base: f64,
    step: f64,
}

impl Default for RawAltitude {
    fn default() -> Self {
        Self {
            base: 10.0,
            step: 1.0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPlanner {
    quad_tol: f64,
}

impl Default for RawPlanner {
    fn default() -> Self {
        Self {
            quad_tol: DEFAULT_QUAD_TOL,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: PathBuf,
    frame_times: Vec<f64>,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            frame_times: Vec::new(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMetrics {
    settle_band: f64,
    safety_distance: f64,
}

impl Default for RawMetrics {
    fn default() -> Self {
        let m = MetricsConfig::default();
        Self {
            settle_band: m.settle_band,
            safety_distance: m.safety_distance,
        }
    }
}

/// How the team is initialized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// At rest on the reference formation, blending weights over `[t0, tf]`.
    #[default]
    Reference,
    /// At rest on the planned positions with the final weights.
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub application: usize,
    pub polygon: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub t0: f64,
    pub tf: f64,
    pub t_end: f64,
    pub dt: f64,
    pub log_stride: usize,
    pub start: StartMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltitudeSpec {
    pub base: f64,
    pub step: f64,
    pub overrides: BTreeMap<AgentId, f64>,
}

impl AltitudeSpec {
    /// Per-agent altitude: the override if given, else `base + step·layer`.
    pub fn assign(&self, graph: &LayeredGraph) -> BTreeMap<AgentId, f64> {
        let mut z = dnncov::sim::layered_altitudes(graph, self.base, self.step);
        for (id, alt) in &self.overrides {
            z.insert(*id, *alt);
        }
        z
    }
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub path: PathBuf,
    pub name: String,
    /// SHA-256 of the file bytes, hex encoded.
    pub hash: String,
    pub reference: ReferenceConfiguration,
    pub heat_map: HeatMap,
    pub zones: Vec<Zone>,
    pub boundary_targets: BTreeMap<AgentId, Vec2>,
    pub vehicle: Quadcopter,
    pub gains: ControllerGains,
    pub schedule: ScheduleSpec,
    pub altitudes: AltitudeSpec,
    pub quad_tol: f64,
    /// Output directory as written, resolved against the scenario's folder.
    pub output_dir: PathBuf,
    pub frame_times: Vec<f64>,
    pub metrics: MetricsConfig,
    agent_lines: BTreeMap<AgentId, usize>,
    agents_line: usize,
    targets_line: usize,
}

struct Ctx<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.src.len());
        self.src.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
    }

    fn err(&self, span: Range<usize>, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            path: self.path.to_path_buf(),
            line: Some(self.line(span)),
            message: message.into(),
        }
    }
}

fn vec2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let bytes = std::fs::read(path).map_err(|e| ScenarioError {
            path: path.to_path_buf(),
            line: None,
            message: format!("cannot read scenario: {e}"),
        })?;
        let src = String::from_utf8(bytes).map_err(|_| ScenarioError {
            path: path.to_path_buf(),
            line: None,
            message: "scenario is not valid UTF-8".into(),
        })?;
        Self::parse(path, &src)
    }

    /// Parses `src` as if it had been read from `path`.
    pub fn parse(path: &Path, src: &str) -> Result<Self, ScenarioError> {
        let ctx = Ctx { path, src };
        let raw: RawScenario = toml::from_str(src).map_err(|e| ScenarioError {
            path: path.to_path_buf(),
            line: e.span().map(|s| ctx.line(s)),
            message: e.message().trim().to_string(),
        })?;
        let hash = hex::encode(Sha256::digest(src.as_bytes()));

        let agents_line = ctx.line(raw.agents.span());
        let mut agent_lines = BTreeMap::new();
        let mut agents = Vec::new();
        let mut overrides = BTreeMap::new();
        for a in raw.agents.get_ref() {
            let span = a.span();
            let a = a.get_ref();
            let id = AgentId(a.id);
            if agent_lines.insert(id, ctx.line(span.clone())).is_some() {
                return Err(ctx.err(span, format!("duplicate agent id {id}")));
            }
            if let Some(z) = a.altitude {
                if !(z > 0.0 && z.is_finite()) {
                    return Err(ctx.err(span, format!("agent {id}: altitude {z} m must be positive")));
                }
                overrides.insert(id, z);
            }
            agents.push(Agent {
                id,
                position: vec2(a.pos),
            });
        }
        let declared = raw
            .boundary
            .as_ref()
            .map(|b| b.get_ref().iter().map(|&i| AgentId(i)).collect::<Vec<_>>());
        let reference = ReferenceConfiguration::new(agents, declared).map_err(|e| {
            let line = match &e {
                FormationError::CoincidentPositions(_, b) => agent_lines.get(b).copied(),
                FormationError::NonFinite { id } => agent_lines.get(id).copied(),
                FormationError::UnknownAgent(_) => raw.boundary.as_ref().map(|b| ctx.line(b.span())),
                _ => None,
            };
            ScenarioError {
                path: path.to_path_buf(),
                line: line.or(Some(agents_line)),
                message: e.to_string(),
            }
        })?;

        let mut applications = Vec::new();
        let mut zones = Vec::new();
        for (k, app) in raw.applications.get_ref().iter().enumerate() {
            let span = app.span();
            let app = app.get_ref();
            let mut targets = Vec::new();
            for t in &app.targets {
                let g = t.get_ref();
                let target = GaussianTarget::new(vec2(g.pos), g.cov)
                    .map_err(|e| ctx.err(t.span(), format!("application {}: {e}", k + 1)))?;
                targets.push(target);
            }
            if targets.is_empty() {
                return Err(ctx.err(span, format!("application {} has no targets", k + 1)));
            }
            if let Some(zone) = &app.zone {
                if zone.len() < 3 || zone.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(ctx.err(span, format!("application {}: zone needs at least three finite vertices", k + 1)));
                }
                zones.push(Zone {
                    application: k,
                    polygon: zone.iter().map(|&p| vec2(p)).collect(),
                });
            }
            applications.push(Application {
                alpha: app.alpha,
                targets,
            });
        }
        let heat_map = HeatMap::new(applications).map_err(|e| {
            let span = match &e {
                HeatMapError::Priority { app, .. } => raw.applications.get_ref()[*app].span(),
                _ => raw.applications.span(),
            };
            ctx.err(span, e.to_string())
        })?;

        let targets_line = ctx.line(raw.boundary_targets.span());
        let mut boundary_targets = BTreeMap::new();
        for t in raw.boundary_targets.get_ref() {
            let g = t.get_ref();
            let id = AgentId(g.id);
            if reference.position(id).is_none() {
                return Err(ctx.err(t.span(), format!("boundary target for unknown agent {id}")));
            }
            if !(g.pos[0].is_finite() && g.pos[1].is_finite()) {
                return Err(ctx.err(t.span(), format!("boundary target for agent {id} is not finite")));
            }
            if boundary_targets.insert(id, vec2(g.pos)).is_some() {
                return Err(ctx.err(t.span(), format!("duplicate boundary target for agent {id}")));
            }
        }

        let (vehicle_span, v) = match raw.vehicle {
            Some(v) => (v.span(), v.into_inner()),
            None => (0..0, RawVehicle::default()),
        };
        let vehicle_err = |msg: String| match raw_span_line(&ctx, &vehicle_span) {
            Some(_) => ctx.err(vehicle_span.clone(), msg),
            None => ScenarioError {
                path: path.to_path_buf(),
                line: None,
                message: msg,
            },
        };
        let mut vehicle = Quadcopter::new(v.mass).map_err(|e| vehicle_err(format!("vehicle: {e}")))?;
        if !(v.min_thrust > 0.0 && v.min_thrust.is_finite()) {
            return Err(vehicle_err(format!("vehicle: min_thrust {} N must be positive", v.min_thrust)));
        }
        if !(v.attitude_margin > 0.0 && v.attitude_margin < std::f64::consts::FRAC_PI_2) {
            return Err(vehicle_err(format!(
                "vehicle: attitude_margin {} rad must lie in (0, π/2)",
                v.attitude_margin
            )));
        }
        vehicle.min_thrust = v.min_thrust;
        vehicle.attitude_margin = v.attitude_margin;
        let gains = design_gains(&PoleSpec {
            translational: v.poles,
            yaw: v.yaw_poles,
        })
        .map_err(|e| vehicle_err(format!("vehicle: {e}")))?;

        let s = raw.schedule.get_ref();
        let sched_err = |msg: String| ctx.err(raw.schedule.span(), format!("schedule: {msg}"));
        if ![s.t0, s.tf, s.t_end].iter().all(|t| t.is_finite()) {
            return Err(sched_err("times must be finite".into()));
        }
        if !(s.t0 < s.tf && s.tf <= s.t_end) {
            return Err(sched_err(format!(
                "need t0 < tf <= t_end (got {}, {}, {})",
                s.t0, s.tf, s.t_end
            )));
        }
        if !(s.dt > 0.0 && s.dt <= MAX_STEP) {
            return Err(sched_err(format!("dt {} s must lie in (0, {MAX_STEP}]", s.dt)));
        }
        if s.log_stride == 0 {
            return Err(sched_err("log_stride must be at least 1".into()));
        }
        let schedule = ScheduleSpec {
            t0: s.t0,
            tf: s.tf,
            t_end: s.t_end,
            dt: s.dt,
            log_stride: s.log_stride,
            start: s.start,
        };

        let alt = raw.altitude.map(|a| a.into_inner()).unwrap_or_default();
        if !(alt.base > 0.0 && alt.base.is_finite() && alt.step >= 0.0 && alt.step.is_finite()) {
            return Err(ScenarioError {
                path: path.to_path_buf(),
                line: None,
                message: format!("altitude: base {} must be positive and step {} non-negative", alt.base, alt.step),
            });
        }

        let quad_tol = match &raw.planner {
            Some(p) => {
                let tol = p.get_ref().quad_tol;
                if !(tol > 0.0 && tol < 1.0) {
                    return Err(ctx.err(p.span(), format!("planner: quad_tol {tol} must lie in (0, 1)")));
                }
                tol
            }
            None => DEFAULT_QUAD_TOL,
        };

        let (output_dir, frame_times) = match raw.output {
            Some(o) => {
                let span = o.span();
                let o = o.into_inner();
                if let Some(t) = o.frame_times.iter().find(|t| !t.is_finite()) {
                    return Err(ctx.err(span, format!("output: frame time {t} is not finite")));
                }
                (o.dir, o.frame_times)
            }
            None => (RawOutput::default().dir, Vec::new()),
        };
        let output_dir = match path.parent() {
            Some(parent) if output_dir.is_relative() => parent.join(output_dir),
            _ => output_dir,
        };

        let metrics = match &raw.metrics {
            Some(m) => {
                let r = m.get_ref();
                if !(r.settle_band > 0.0 && r.safety_distance >= 0.0) {
                    return Err(ctx.err(m.span(), "metrics: settle_band must be positive and safety_distance non-negative"));
                }
                MetricsConfig {
                    settle_band: r.settle_band,
                    safety_distance: r.safety_distance,
                }
            }
            None => MetricsConfig::default(),
        };

        Ok(Self {
            path: path.to_path_buf(),
            name: raw.name.unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            }),
            hash,
            reference,
            heat_map,
            zones,
            boundary_targets,
            vehicle,
            gains,
            schedule,
            altitudes: AltitudeSpec {
                base: alt.base,
                step: alt.step,
                overrides,
            },
            quad_tol,
            output_dir,
            frame_times,
            metrics,
            agent_lines,
            agents_line,
            targets_line,
        })
    }

    /// Line of an agent's entry, falling back to the `agents` array.
    pub fn agent_line(&self, id: AgentId) -> usize {
        self.agent_lines.get(&id).copied().unwrap_or(self.agents_line)
    }

    pub fn agents_line(&self) -> usize {
        self.agents_line
    }

    pub fn targets_line(&self) -> usize {
        self.targets_line
    }

    /// Wraps a later failure (graph construction, planning) in a located error.
    pub fn error_at(&self, line: usize, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            path: self.path.clone(),
            line: Some(line),
            message: message.into(),
        }
    }
}

fn raw_span_line(ctx: &Ctx<'_>, span: &Range<usize>) -> Option<usize> {
    (span.end > span.start).then(|| ctx.line(span.clone()))
}
