//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use dnncov::formation::{validate_dnn, Agent, FormationError, INTERIOR_MARGIN};
use dnncov::geometry::convex_hull;
use dnncov::heatmap::{integrate_polygon, Application, GaussianTarget, HeatMap, Uniform, DEFAULT_QUAD_TOL};
use dnncov::planner::plan;
use dnncov::quadcopter::{design_gains, FlatState, PoleSpec, Quadcopter};
use dnncov::weights::solve_simplex_weights;
use dnncov::{AgentId, LayeredGraph, Plan, ReferenceConfiguration, Vec2, Vec3};
use dnncov_cli::artifacts::read_trajectory_csv;
use dnncov_cli::commands::{cmd_plan, cmd_render, cmd_simulate, load_plan, TRAJECTORY_FILE};
use dnncov_cli::ScenarioFile;
use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn cramer(p: Vec2, t: [Vec2; 3]) -> [f64; 3] {
    let det = |a: Vec2, b: Vec2| a.x * b.y - a.y * b.x;
    let total = det(t[1] - t[0], t[2] - t[0]);
    let w1 = det(t[1] - p, t[2] - p) / total;
    let w2 = det(t[2] - p, t[0] - p) / total;
    let w3 = det(t[0] - p, t[1] - p) / total;
    [w1, w2, w3]
}

fn barycentric_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cases = Vec::with_capacity(1000);
    while cases.len() < 1000 {
        let t = [0; 3].map(|_| Vec2::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)));
        let area = 0.5 * (t[1] - t[0]).perp(&(t[2] - t[0]));
        if area.abs() < 1.0 {
            continue;
        }
        let e: [f64; 3] = [0; 3].map(|_| Exp1.sample(&mut rng));
        let s: f64 = e.iter().sum();
        let p = t[0] * (e[0] / s) + t[1] * (e[1] / s) + t[2] * (e[2] / s);
        cases.push((p, t));
    }
    let start = Instant::now();
    let solved: Vec<_> = cases.iter().map(|&(p, t)| solve_simplex_weights(p, t)).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let (mut residual, mut sum_err, mut oracle_err) = (0.0f64, 0.0f64, 0.0f64);
    for ((p, t), w) in cases.iter().zip(solved) {
        let w = w.map_err(|e| format!("solve failed: {e}"))?.values;
        let recon = t[0] * w[0] + t[1] * w[1] + t[2] * w[2];
        residual = residual.max((p - recon).norm());
        sum_err = sum_err.max((w.iter().sum::<f64>() - 1.0).abs());
        let c = cramer(*p, *t);
        for k in 0..3 {
            oracle_err = oracle_err.max((w[k] - c[k]).abs());
        }
    }
    check(
        residual < 1e-10 && sum_err <= 1e-12 && oracle_err < 1e-9 && elapsed < 1.0,
        format!(
            "1000 cases: max residual {residual:.2e} m, max |Σw-1| {sum_err:.2e}, max |w-cramer| {oracle_err:.2e}, {elapsed:.4} s"
        ),
    )
}

fn random_feasible_formation(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let corners = rng.random_range(3..=10);
    let mut angles: Vec<f64> = (0..corners).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let (ax, ay) = (rng.random_range(10.0..40.0), rng.random_range(10.0..40.0));
    let mut pts: Vec<Vec2> = angles.iter().map(|a| Vec2::new(ax * a.cos(), ay * a.sin())).collect();
    for _ in 0..rng.random_range(1..=40) {
        let r = 0.75 * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        pts.push(Vec2::new(ax * r * a.cos(), ay * r * a.sin()));
    }
    pts
}

fn graph_feasibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut accepted, mut resampled, mut followers) = (0, 0, 0);
    let mut worst_margin = f64::INFINITY;
    while accepted < 100 {
        let pts = random_feasible_formation(&mut rng);
        let agents = pts
            .iter()
            .enumerate()
            .map(|(k, &position)| Agent {
                id: AgentId(k as u32 + 1),
                position,
            })
            .collect();
        let Ok(cfg) = ReferenceConfiguration::new(agents, None) else {
            resampled += 1;
            continue;
        };
        let graph = match LayeredGraph::build(&cfg) {
            Ok(g) => g,
            // Hull too small to hold an interior agent, or a follower grazing
            // every candidate triangle: not a feasible formation.
            Err(FormationError::Infeasible(_) | FormationError::NoInteriorAgent) => {
                resampled += 1;
                continue;
            }
            Err(e) => return Err(format!("unexpected build error {e}")),
        };
        let report = validate_dnn(&graph, &cfg);
        if !report.is_valid() {
            return Err(format!("formation {accepted}: {report}"));
        }
        for id in graph.followers() {
            let simplex = graph.simplex(id).ok_or("follower without simplex")?;
            let t = simplex.map(|n| cfg.position(n).unwrap());
            let w = solve_simplex_weights(cfg.position(id).unwrap(), t).map_err(|e| e.to_string())?;
            worst_margin = worst_margin.min(w.min());
            followers += 1;
        }
        accepted += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        worst_margin >= INTERIOR_MARGIN && elapsed < 10.0,
        format!(
            "100 formations ({resampled} infeasible draws resampled), {followers} followers, min barycentric weight {worst_margin:.3e}, {elapsed:.2} s"
        ),
    )
}

fn random_cov(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [[f64; 2]; 2] {
    let (s1, s2) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
    let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (c, s) = (a.cos(), a.sin());
    let xx = c * c * s1 * s1 + s * s * s2 * s2;
    let yy = s * s * s1 * s1 + c * c * s2 * s2;
    let xy = c * s * (s1 * s1 - s2 * s2);
    [[xx, xy], [xy, yy]]
}

fn inside_convex(poly: &[Vec2], p: Vec2) -> bool {
    (0..poly.len()).all(|k| {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        (b - a).perp(&(p - a)) >= 0.0
    })
}

fn monte_carlo(map: &HeatMap, poly: &[Vec2], samples: u64, seed: u64) -> f64 {
    // Sample the mixture itself: apps by priority, targets uniformly.
    let draws: Vec<(f64, Vec2, Matrix2<f64>)> = map
        .applications()
        .iter()
        .flat_map(|app| {
            let share = app.alpha / app.targets.len() as f64;
            app.targets.iter().map(move |t| {
                let c = t.covariance();
                let chol = Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]).cholesky().unwrap().l();
                (share, t.mean(), chol)
            })
        })
        .collect();
    let chunks = 64u64;
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + chunk);
            let n = samples / chunks;
            let mut hits = 0u64;
            for _ in 0..n {
                let mut u: f64 = rng.random();
                let mut pick = draws.len() - 1;
                for (k, d) in draws.iter().enumerate() {
                    if u < d.0 {
                        pick = k;
                        break;
                    }
                    u -= d.0;
                }
                let (_, mean, l) = &draws[pick];
                let z = Vec2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                if inside_convex(poly, mean + l * z) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    hits as f64 / (samples / chunks * chunks) as f64
}

fn heatmap_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_norm = 0.0f64;
    for _ in 0..20 {
        let cov = random_cov(&mut rng, 0.2, 5.0);
        let mean = Vec2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let g = GaussianTarget::new(mean, cov).map_err(|e| e.to_string())?;
        let (hx, hy) = (8.0 * cov[0][0].sqrt(), 8.0 * cov[1][1].sqrt());
        let boxp = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)].map(|(x, y)| mean + Vec2::new(x, y));
        let m = integrate_polygon(&g, &boxp, 1e-8).map_err(|e| e.to_string())?;
        worst_norm = worst_norm.max((m.mass - 1.0).abs());
    }

    let mut worst_rel = 0.0f64;
    let mut pairs = 0;
    let start = Instant::now();
    while pairs < 20 {
        let apps = rng.random_range(1..=3);
        let raw: Vec<f64> = (0..apps).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let applications: Vec<Application> = raw
            .iter()
            .map(|a| Application {
                alpha: a / total,
                targets: (0..rng.random_range(1..=3))
                    .map(|_| {
                        let mean = Vec2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0));
                        GaussianTarget::new(mean, random_cov(&mut rng, 0.5, 6.0)).unwrap()
                    })
                    .collect(),
            })
            .collect();
        let map = HeatMap::new(applications).map_err(|e| e.to_string())?;
        let corners: Vec<Vec2> = (0..rng.random_range(4..=9))
            .map(|_| Vec2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)))
            .collect();
        let Some(hull) = convex_hull(&corners) else { continue };
        let poly: Vec<Vec2> = hull.iter().map(|&k| corners[k]).collect();
        let quad = integrate_polygon(&map, &poly, 1e-8).map_err(|e| e.to_string())?.mass;
        // Keep the Monte-Carlo standard error well below the tolerance.
        if quad < 0.1 {
            continue;
        }
        let mc = monte_carlo(&map, &poly, 10_000_000, pairs);
        worst_rel = worst_rel.max((quad - mc).abs() / mc);
        pairs += 1;
    }
    check(
        worst_norm <= 1e-4 && worst_rel < 5e-3,
        format!(
            "±8σ mass error {worst_norm:.2e} over 20 Gaussians; 20 mixture/polygon pairs vs 1e7-sample Monte Carlo: worst relative gap {:.3}% ({:.1} s)",
            worst_rel * 100.0,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn square_team() -> (ReferenceConfiguration, BTreeMap<AgentId, Vec2>) {
    let cfg = ReferenceConfiguration::new(
        [(1, 0.0, 0.0), (2, 10.0, 0.0), (3, 10.0, 10.0), (4, 0.0, 10.0), (5, 5.0, 5.2), (6, 7.0, 3.0)]
            .iter()
            .map(|&(id, x, y)| Agent {
                id: AgentId(id),
                position: Vec2::new(x, y),
            })
            .collect(),
        None,
    )
    .unwrap();
    let targets = [(1, -2.0, -1.0), (2, 12.0, 0.0), (3, 12.0, 11.0), (4, -1.0, 10.0)]
        .iter()
        .map(|&(id, x, y)| (AgentId(id), Vec2::new(x, y)))
        .collect();
    (cfg, targets)
}

fn forward_pass_oracle() -> Outcome {
    let (cfg, targets) = square_team();
    let id = AgentId(6);
    let uniform = plan(&cfg, &Uniform(1.0), &targets, 0.0, 60.0, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
    let tri = uniform.desired.simplices[&id];
    let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
    let uniform_err = (uniform.desired.positions[&id] - centroid).norm();

    // Incenter: farthest point from the edges.
    let side = |a: Vec2, b: Vec2| (a - b).norm();
    let (a, b, c) = (side(tri[1], tri[2]), side(tri[2], tri[0]), side(tri[0], tri[1]));
    let incenter = (tri[0] * a + tri[1] * b + tri[2] * c) / (a + b + c);
    let area = 0.5 * (tri[1] - tri[0]).perp(&(tri[2] - tri[0])).abs();
    let inradius = 2.0 * area / (a + b + c);
    let tight = HeatMap::new(vec![Application {
        alpha: 1.0,
        targets: vec![GaussianTarget::new(incenter, [[0.01, 0.0], [0.0, 0.01]]).unwrap()],
    }])
    .unwrap();
    let peaked = plan(&cfg, &tight, &targets, 0.0, 60.0, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
    let tight_err = (peaked.desired.positions[&id] - incenter).norm();
    check(
        tight_err < 0.01 && uniform_err < 1e-6 && inradius > 1.0,
        format!("σ = 0.1 m Gaussian: |p - mean| = {tight_err:.2e} m (inradius {inradius:.2} m); uniform: |p - centroid| = {uniform_err:.2e} m"),
    )
}

fn feedback_linearization_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gains = design_gains(&PoleSpec::default()).map_err(|e| e.to_string())?;
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut probes = 0;
    for _ in 0..10 {
        let quad = Quadcopter::new(rng.random_range(0.5..3.0)).unwrap();
        let mut s = quad.hover(Vec3::new(0.0, 0.0, 10.0));
        for k in 3..6 {
            s.0[k] = rng.random_range(-1.0..1.0);
        }
        for k in 6..9 {
            s.0[k] = rng.random_range(-0.2..0.2);
        }
        for k in 9..12 {
            s.0[k] = rng.random_range(-0.3..0.3);
        }
        s.0[12] *= rng.random_range(0.8..1.2);
        s.0[13] = rng.random_range(-1.0..1.0);
        let target = FlatState::at_rest(
            Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(8.0..12.0)),
            rng.random_range(-0.5..0.5),
        );
        for _ in 0..5 {
            for _ in 0..rng.random_range(20..80) {
                let u = gains.control(&quad, &s, &target).map_err(|e| e.to_string())?;
                s = quad.step(&s, &u, 0.01).map_err(|e| e.to_string())?;
            }
            // Hold u and difference the acceleration rows of the vector field.
            let u = gains.control(&quad, &s, &target).map_err(|e| e.to_string())?;
            let s1 = quad.step(&s, &u, h).map_err(|e| e.to_string())?;
            let s2 = quad.step(&s1, &u, h).map_err(|e| e.to_string())?;
            let acc = |x| -> Result<Vec3, String> {
                let d = quad.derivative(x, &u).map_err(|e| e.to_string())?;
                Ok(Vec3::new(d[3], d[4], d[5]))
            };
            let fd = (acc(&s2)? - 2.0 * acc(&s1)? + acc(&s)?) / (h * h);
            let lin = quad.linearizing_matrices(&s1).map_err(|e| e.to_string())?;
            let full = lin.m1 * u + lin.m2;
            let pred = Vec3::new(full[0], full[1], full[2]);
            worst = worst.max((fd - pred).norm() / pred.norm().max(1e-3));
            probes += 1;
        }
    }
    check(
        worst < 1e-3,
        format!("{probes} probes on 10 controlled trajectories: worst relative gap {worst:.2e}"),
    )
}

/// 1 % settling time of the x error under the ideal integrator chain.
fn linear_chain_settling(poles: &[f64; 4], dt: f64, t_end: f64) -> f64 {
    let mut c = vec![1.0];
    for &p in poles {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= p * ck;
        }
        c = next;
    }
    let f = |e: [f64; 4]| [e[1], e[2], e[3], -(c[0] * e[0] + c[1] * e[1] + c[2] * e[2] + c[3] * e[3])];
    let mut e = [-1.0, 0.0, 0.0, 0.0];
    let mut last_out = 0.0;
    let steps = (t_end / dt).round() as usize;
    for k in 0..steps {
        let add = |a: [f64; 4], b: [f64; 4], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]];
        let k1 = f(e);
        let k2 = f(add(e, k1, dt / 2.0));
        let k3 = f(add(e, k2, dt / 2.0));
        let k4 = f(add(e, k3, dt));
        for i in 0..4 {
            e[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if e[0].abs() > 0.01 {
            last_out = (k + 1) as f64 * dt;
        }
    }
    last_out
}

fn closed_loop_tracking() -> Outcome {
    let poles = PoleSpec::default();
    let gains = design_gains(&poles).map_err(|e| e.to_string())?;
    let quad = Quadcopter::new(1.0).unwrap();
    let target = FlatState::at_rest(Vec3::new(1.0, 0.0, 10.0), 0.0);
    let mut s = quad.hover(Vec3::new(0.0, 0.0, 10.0));
    let dt = 0.01;
    let mut log = Vec::new();
    let mut settled_after = 0.0;
    for k in 0..1200 {
        let t = k as f64 * dt;
        let e = (s.position() - target.position()).norm();
        log.push((t, e));
        if e > 0.01 {
            settled_after = t + dt;
        }
        let u = gains.control(&quad, &s, &target).map_err(|e| e.to_string())?;
        s = quad.step(&s, &u, dt).map_err(|e| e.to_string())?;
    }
    let window: Vec<(f64, f64)> = log.iter().filter(|(t, _)| (6.0..=10.0).contains(t)).map(|&(t, e)| (t, e.ln())).collect();
    let n = window.len() as f64;
    let (mt, me) = (window.iter().map(|w| w.0).sum::<f64>() / n, window.iter().map(|w| w.1).sum::<f64>() / n);
    let slope = window.iter().map(|w| (w.0 - mt) * (w.1 - me)).sum::<f64>()
        / window.iter().map(|w| (w.0 - mt).powi(2)).sum::<f64>();
    let slowest = poles.slowest();
    let rel = (slope - slowest).abs() / slowest.abs();
    let implied = linear_chain_settling(&poles.translational, dt, 12.0);
    check(
        rel < 0.1 && settled_after <= implied + dt,
        format!(
            "decay rate {slope:.3} /s vs slowest pole {slowest} ({:.1}% off); 1% settling {settled_after:.2} s vs {implied:.2} s for the ideal chain",
            rel * 100.0
        ),
    )
}

/// Followers' fixed point under the final weights with leaders on target.
fn fixed_point(plan: &Plan) -> BTreeMap<AgentId, Vec2> {
    let followers: Vec<AgentId> = plan.schedule.followers().keys().copied().collect();
    let index: BTreeMap<AgentId, usize> = followers.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let n = followers.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DMatrix::<f64>::zeros(n, 2);
    for (&id, fw) in plan.schedule.followers() {
        let i = index[&id];
        for (nb, w) in fw.neighbors.iter().zip(fw.varpi) {
            match index.get(nb) {
                Some(&j) => a[(i, j)] -= w,
                None => {
                    let p = plan.desired.positions[nb];
                    b[(i, 0)] += w * p.x;
                    b[(i, 1)] += w * p.y;
                }
            }
        }
    }
    let x = a.lu().solve(&b).expect("fixed-point system is regular");
    followers
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, Vec2::new(x[(k, 0)], x[(k, 1)])))
        .collect()
}

struct Run {
    dir: tempfile::TempDir,
    seconds: f64,
    final_deviation: f64,
}

fn plan_and_simulate(name: &str) -> Result<Run, String> {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let scenario = fixture(name);
    let start = Instant::now();
    let planned = cmd_plan(&scenario, Some(dir.path())).map_err(|e| e.to_string())?;
    let sim = cmd_simulate(&scenario, &planned.path, Some(dir.path())).map_err(|e| e.to_string())?;
    Ok(Run {
        seconds: start.elapsed().as_secs_f64(),
        final_deviation: sim.metrics.final_deviation,
        dir,
    })
}

fn desk_scale(runs: &mut Vec<(String, Run)>) -> Outcome {
    let run = plan_and_simulate("desk16.toml")?;
    let scn = ScenarioFile::load(&fixture("desk16.toml")).map_err(|e| e.to_string())?;
    let plan = load_plan(&scn, &run.dir.path().join("plan.json")).map_err(|e| e.to_string())?;
    let file = std::fs::File::open(run.dir.path().join(TRAJECTORY_FILE)).map_err(|e| e.to_string())?;
    let traj = read_trajectory_csv(file).map_err(|e| e.to_string())?;
    let last = traj.final_samples();
    let mut fp_gap = 0.0f64;
    for (id, p) in fixed_point(&plan) {
        let i = traj.agent_index(id).ok_or("agent missing from log")?;
        fp_gap = fp_gap.max((last[i].position.xy() - p).norm());
    }
    let detail = format!(
        "N = 16, t_end = {} s: final deviation {:.2e} m, gap to fixed point {fp_gap:.2e} m, {:.2} s wall",
        traj.times.last().unwrap(),
        run.final_deviation,
        run.seconds
    );
    let ok = run.final_deviation < 0.05 && fp_gap < 1e-3 && run.seconds < 30.0;
    runs.push(("desk16".into(), run));
    check(ok, detail)
}

fn full_scale(runs: &mut Vec<(String, Run)>) -> Outcome {
    let run = plan_and_simulate("team165.toml")?;
    let scenario = fixture("team165.toml");
    let traj_path = run.dir.path().join(TRAJECTORY_FILE);
    let start = Instant::now();
    let frames = cmd_render(&traj_path, &scenario, Some(&[15.0, 35.0, 80.0]), Some(run.dir.path())).map_err(|e| e.to_string())?;
    let seconds = run.seconds + start.elapsed().as_secs_f64();

    let scn = ScenarioFile::load(&scenario).map_err(|e| e.to_string())?;
    let plan = load_plan(&scn, &run.dir.path().join("plan.json")).map_err(|e| e.to_string())?;
    let traj = read_trajectory_csv(std::fs::File::open(&traj_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    // Mean distance to the plan shrinks and mean distance from the start grows
    // from snapshot to snapshot.
    let stats = |t: f64| {
        let row = &traj.samples[traj.time_index(t).unwrap()];
        let n = row.len() as f64;
        let (mut to_goal, mut from_start) = (0.0, 0.0);
        for (id, smp) in traj.ids.iter().zip(row) {
            to_goal += (smp.position.xy() - plan.desired.positions[id]).norm() / n;
            from_start += (smp.position.xy() - scn.reference.position(*id).unwrap()).norm() / n;
        }
        (to_goal, from_start)
    };
    let snaps: Vec<(f64, (f64, f64))> = [0.0, 15.0, 35.0, 80.0].iter().map(|&t| (t, stats(t))).collect();
    let monotone = snaps.windows(2).all(|w| w[1].1 .0 < w[0].1 .0 && w[1].1 .1 > w[0].1 .1);
    let shown: Vec<String> = snaps
        .iter()
        .skip(1)
        .map(|(t, (g, s))| format!("t={t}: {g:.2} m to plan, {s:.2} m moved"))
        .collect();
    let detail = format!(
        "N = {}, M = {}: {} frames, {}; final deviation {:.2e} m, {seconds:.1} s wall",
        traj.ids.len(),
        plan.graph.depth(),
        frames.len(),
        shown.join("; "),
        run.final_deviation
    );
    let ok = frames.len() == 3 && monotone && run.final_deviation < 0.05 && seconds < 300.0;
    runs.push(("team165".into(), run));
    check(ok, detail)
}

fn determinism(runs: &[(String, Run)]) -> Outcome {
    if runs.len() != 2 {
        return Err("criteria 7 and 8 did not both produce logs".into());
    }
    let mut details = Vec::new();
    let mut ok = true;
    for (name, first) in runs {
        let second = plan_and_simulate(&format!("{name}.toml"))?;
        let a = std::fs::read(first.dir.path().join(TRAJECTORY_FILE)).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.dir.path().join(TRAJECTORY_FILE)).map_err(|e| e.to_string())?;
        let same = a == b;
        ok &= same;
        details.push(format!("{name}: {} bytes {}", a.len(), if same { "identical" } else { "DIFFER" }));
    }
    check(ok, details.join(", "))
}

fn main() {
    let mut runs = Vec::new();
    let mut failed = 0;
    let mut report = |n: usize, title: &str, outcome: std::thread::Result<Outcome>| {
        let (tag, detail) = match outcome {
            Ok(Ok(d)) => ("PASS", d),
            Ok(Err(d)) => ("FAIL", d),
            Err(_) => ("FAIL", "panicked".to_string()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("criterion {n} [{tag}] {title}: {detail}");
    };
    report(1, "barycentric correctness", catch_unwind(barycentric_correctness));
    report(2, "graph feasibility", catch_unwind(graph_feasibility));
    report(3, "heat-map normalization", catch_unwind(heatmap_normalization));
    report(4, "forward-pass oracle", catch_unwind(forward_pass_oracle));
    report(5, "feedback-linearization identity", catch_unwind(feedback_linearization_identity));
    report(6, "closed-loop tracking", catch_unwind(closed_loop_tracking));
    report(7, "desk-scale end-to-end", catch_unwind(AssertUnwindSafe(|| desk_scale(&mut runs))));
    report(8, "full-scale protocol", catch_unwind(AssertUnwindSafe(|| full_scale(&mut runs))));
    report(9, "determinism", catch_unwind(AssertUnwindSafe(|| determinism(&runs))));
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
