//! The four pipeline commands as plain functions of their input files.

use crate::artifacts::{self, ArtifactError, PlanDocument, RunInfo};
use crate::render::Scene;
use crate::scenario::{ScenarioError, ScenarioFile, StartMode};
use dnncov::formation::{validate_dnn, FormationError};
use dnncov::planner::{plan, Plan, PlanError};
use dnncov::sim::{self, Metrics, SimError};
use dnncov::LayeredGraph;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const PLAN_FILE: &str = "plan.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Artifact { path: PathBuf, source: ArtifactError },
    #[error("stale plan: {plan} was built from scenario {found:.12}…, but {scenario} hashes to {expected:.12}…; re-run `dnncov plan`")]
    Stale {
        plan: PathBuf,
        scenario: PathBuf,
        found: String,
        expected: String,
    },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("render time {t} s is outside the logged range [{first}, {last}] s")]
    TimeRange { t: f64, first: f64, last: f64 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for bad invocations, 1 for everything the inputs themselves cause.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Override if given, else the scenario's own output directory.
pub fn output_dir(scenario: &ScenarioFile, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| scenario.output_dir.clone());
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn locate_formation(scn: &ScenarioFile, e: &FormationError) -> usize {
    match e {
        FormationError::DuplicateId(id)
        | FormationError::NonFinite { id }
        | FormationError::UnknownAgent(id)
        | FormationError::CoincidentPositions(_, id) => scn.agent_line(*id),
        FormationError::Infeasible(ids) => ids.first().map_or(scn.agents_line(), |id| scn.agent_line(*id)),
        _ => scn.agents_line(),
    }
}

fn locate_plan_error(scn: &ScenarioFile, e: PlanError) -> CliError {
    let line = match &e {
        PlanError::Formation(f) => locate_formation(scn, f),
        PlanError::MissingBoundaryTargets(_)
        | PlanError::UnexpectedBoundaryTargets(_)
        | PlanError::DegenerateTargets => scn.targets_line(),
        PlanError::SingularSimplex { id, .. }
        | PlanError::Region { id, .. }
        | PlanError::MissingNeighbor { id } => scn.agent_line(*id),
        _ => scn.agents_line(),
    };
    scn.error_at(line, e.to_string()).into()
}

/// Runs the planner on a loaded scenario.
pub fn plan_scenario(scn: &ScenarioFile) -> Result<Plan, CliError> {
    plan(
        &scn.reference,
        &scn.heat_map,
        &scn.boundary_targets,
        scn.schedule.t0,
        scn.schedule.tf,
        scn.quad_tol,
    )
    .map_err(|e| locate_plan_error(scn, e))
}

pub fn summary(plan: &Plan) -> String {
    let sizes: Vec<String> = plan.layer_sizes().iter().map(usize::to_string).collect();
    format!(
        "agents: {}\nlayers: M = {}\nlayer sizes: {}\n",
        plan.len(),
        plan.graph.depth(),
        sizes.join(" ")
    )
}

pub struct PlanOutcome {
    pub path: PathBuf,
    pub plan: Plan,
    pub summary: String,
}

pub fn cmd_plan(scenario: &Path, out: Option<&Path>) -> Result<PlanOutcome, CliError> {
    let scn = ScenarioFile::load(scenario)?;
    let plan = plan_scenario(&scn)?;
    let dir = output_dir(&scn, out)?;
    let path = dir.join(PLAN_FILE);
    write_file(&path, &PlanDocument::new(&plan, &scn.hash).to_json())?;
    Ok(PlanOutcome {
        summary: summary(&plan),
        path,
        plan,
    })
}

/// Reads a plan file and checks it belongs to `scn`.
pub fn load_plan(scn: &ScenarioFile, path: &Path) -> Result<Plan, CliError> {
    let artifact = |source| CliError::Artifact {
        path: path.to_path_buf(),
        source,
    };
    let src = fs::read_to_string(path).map_err(io_err(path))?;
    let doc = PlanDocument::from_json(&src).map_err(artifact)?;
    if doc.scenario_hash != scn.hash {
        return Err(CliError::Stale {
            plan: path.to_path_buf(),
            scenario: scn.path.clone(),
            found: doc.scenario_hash,
            expected: scn.hash.clone(),
        });
    }
    doc.to_plan(&scn.reference).map_err(artifact)
}

/// The simulation set up by a scenario and its plan.
pub fn sim_scenario(scn: &ScenarioFile, plan: Plan) -> Result<sim::Scenario, CliError> {
    let altitudes = scn.altitudes.assign(&plan.graph);
    let s = sim::Scenario {
        start: sim::Scenario::start_from(&scn.reference),
        plan,
        vehicle: scn.vehicle,
        gains: scn.gains,
        altitudes,
        dt: scn.schedule.dt,
        t_end: scn.schedule.t_end,
        log_stride: scn.schedule.log_stride,
    };
    Ok(match scn.schedule.start {
        StartMode::Reference => s,
        StartMode::Equilibrium => s.at_equilibrium(),
    })
}

pub struct SimOutcome {
    pub trajectory: PathBuf,
    pub metrics_path: PathBuf,
    pub metrics: Metrics,
    pub report: String,
}

pub fn cmd_simulate(scenario: &Path, plan_path: &Path, out: Option<&Path>) -> Result<SimOutcome, CliError> {
    let scn = ScenarioFile::load(scenario)?;
    let plan = load_plan(&scn, plan_path)?;
    let setup = sim_scenario(&scn, plan)?;
    let traj = sim::run(&setup)?;
    let metrics = sim::metrics(&traj, &setup.plan, &scn.metrics);

    let dir = output_dir(&scn, out)?;
    let trajectory = dir.join(TRAJECTORY_FILE);
    let file = fs::File::create(&trajectory).map_err(io_err(&trajectory))?;
    artifacts::write_trajectory_csv(&traj, BufWriter::new(file)).map_err(|source| CliError::Artifact {
        path: trajectory.clone(),
        source,
    })?;
    let metrics_path = dir.join(METRICS_FILE);
    let info = RunInfo {
        scenario_hash: &scn.hash,
        layers: setup.plan.graph.depth(),
        t_end: scn.schedule.t_end,
        dt: scn.schedule.dt,
    };
    write_file(&metrics_path, &artifacts::metrics_json(&metrics, &info))?;

    let mut report = format!(
        "final deviation: {:.6} m{}\nmax tracking error: {:.6} m\n",
        metrics.final_deviation,
        metrics
            .worst_final_agent
            .map(|id| format!(" (agent {id})"))
            .unwrap_or_default(),
        metrics.max_tracking_error
    );
    if let Some(c) = &metrics.closest_pair {
        report.push_str(&format!(
            "closest planar approach: {:.4} m between {} and {} at t = {:.2} s (vertical gap {:.2} m){}\n",
            c.planar_distance,
            c.a,
            c.b,
            c.t,
            c.vertical_gap,
            if metrics.separation_flag { " [below safety distance]" } else { "" }
        ));
    }
    let unsettled = metrics.settling_times.values().filter(|t| t.is_none()).count();
    let slowest = metrics
        .settling_times
        .values()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if slowest.is_finite() {
        report.push_str(&format!("latest settling time: {slowest:.2} s\n"));
    }
    if unsettled > 0 {
        report.push_str(&format!("agents never settled: {unsettled}\n"));
    }
    Ok(SimOutcome {
        trajectory,
        metrics_path,
        metrics,
        report,
    })
}

/// File name of the frame for time `t`.
pub fn frame_name(t: f64) -> String {
    format!("frame_{t:.1}s.svg")
}

/// Writes one SVG per requested time; `times = None` uses the scenario's
/// frame times.
pub fn cmd_render(
    trajectory: &Path,
    scenario: &Path,
    times: Option<&[f64]>,
    out: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let scn = ScenarioFile::load(scenario)?;
    let times = times.unwrap_or(&scn.frame_times);
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(trajectory).map_err(io_err(trajectory))?;
    let traj = artifacts::read_trajectory_csv(std::io::BufReader::new(file)).map_err(|source| {
        CliError::Artifact {
            path: trajectory.to_path_buf(),
            source,
        }
    })?;
    let indices = times
        .iter()
        .map(|&t| {
            traj.time_index(t).ok_or(CliError::TimeRange {
                t,
                first: traj.times[0],
                last: *traj.times.last().unwrap(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let graph = LayeredGraph::build(&scn.reference)
        .map_err(|e| CliError::from(scn.error_at(locate_formation(&scn, &e), e.to_string())))?;
    if traj.ids != scn.reference.ids().collect::<Vec<_>>() {
        return Err(CliError::Artifact {
            path: trajectory.to_path_buf(),
            source: ArtifactError::Trajectory("agents differ from the scenario's".into()),
        });
    }

    let scene = Scene::new(&scn, &graph, &traj);
    let dir = output_dir(&scn, out)?;
    let mut written = Vec::new();
    for (&t, k) in times.iter().zip(indices) {
        let path = dir.join(frame_name(t));
        write_file(&path, &scene.render(k))?;
        written.push(path);
    }
    Ok(written)
}

/// Checks the scenario end to end short of simulating; returns a report.
pub fn cmd_validate(scenario: &Path) -> Result<String, CliError> {
    let scn = ScenarioFile::load(scenario)?;
    let graph = LayeredGraph::build(&scn.reference)
        .map_err(|e| CliError::from(scn.error_at(locate_formation(&scn, &e), e.to_string())))?;
    let report = validate_dnn(&graph, &scn.reference);
    if !report.is_valid() {
        return Err(scn.error_at(scn.agents_line(), format!("graph violates its invariants: {report}")).into());
    }
    let plan = plan_scenario(&scn)?;
    let altitudes = scn.altitudes.assign(&plan.graph);
    sim_scenario(&scn, plan.clone())?.validate()?;
    let low = altitudes.values().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{}: valid\n{}lowest altitude: {low} m\n",
        scn.path.display(),
        summary(&plan)
    ))
}
