//! Brute-force oracles for hull classification and the greedy layer rule.

use dnncov::formation::{build_layers, classify_boundary, validate_dnn, Agent, FormationError, INTERIOR_MARGIN};
use dnncov::geometry::orient;
use dnncov::{AgentId, LayeredGraph, ReferenceConfiguration, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn config(points: &[Vec2]) -> Result<ReferenceConfiguration, FormationError> {
    ReferenceConfiguration::new(
        points
            .iter()
            .enumerate()
            .map(|(k, &position)| Agent {
                id: AgentId(k as u32 + 1),
                position,
            })
            .collect(),
        None,
    )
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn in_closed_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    let (d1, d2, d3) = (orient(a, b, p), orient(b, c, p), orient(c, a, p));
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

/// A point is a hull corner iff it is outside the hull of the others, i.e.
/// in no closed triangle and on no segment spanned by them.
fn brute_force_corners(points: &[Vec2]) -> BTreeSet<usize> {
    let n = points.len();
    (0..n)
        .filter(|&i| {
            let p = points[i];
            let others: Vec<Vec2> = (0..n).filter(|&j| j != i).map(|j| points[j]).collect();
            for a in 0..others.len() {
                for b in a + 1..others.len() {
                    if on_segment(p, others[a], others[b]) {
                        return false;
                    }
                    for c in b + 1..others.len() {
                        if orient(others[a], others[b], others[c]) != 0.0
                            && in_closed_triangle(p, others[a], others[b], others[c])
                        {
                            return false;
                        }
                    }
                }
            }
            true
        })
        .collect()
}

#[test]
fn hull_classification_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(4..=18);
        // A coarse integer grid makes collinear hull points common.
        let coarse = rng.random_bool(0.5);
        let points: Vec<Vec2> = (0..n)
            .map(|_| {
                if coarse {
                    Vec2::new(rng.random_range(0..6) as f64, rng.random_range(0..6) as f64)
                } else {
                    Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
                }
            })
            .collect();
        let Ok(cfg) = config(&points) else {
            continue;
        };
        let oracle = brute_force_corners(&points);
        match classify_boundary(&cfg) {
            Ok(split) => {
                let got: BTreeSet<usize> = split.boundary.iter().map(|id| id.0 as usize - 1).collect();
                assert_eq!(got, oracle, "points {points:?}");
                let interior: BTreeSet<usize> = split.interior.iter().map(|id| id.0 as usize - 1).collect();
                assert_eq!(interior.len() + got.len(), n);
                assert!(interior.is_disjoint(&got));
            }
            Err(FormationError::DegenerateHull) => assert!(oracle.len() < 3),
            Err(e) => panic!("unexpected {e}"),
        }
        checked += 1;
    }
}

fn barycentric_min(p: Vec2, t: [Vec2; 3]) -> f64 {
    let det = (t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y);
    let l1 = ((t[1].x - p.x) * (t[2].y - p.y) - (t[2].x - p.x) * (t[1].y - p.y)) / det;
    let l2 = ((t[2].x - p.x) * (t[0].y - p.y) - (t[0].x - p.x) * (t[2].y - p.y)) / det;
    l1.min(l2).min(1.0 - l1 - l2)
}

fn area(t: [Vec2; 3]) -> f64 {
    0.5 * ((t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y)).abs()
}

/// Re-derives every follower's simplex and layer from scratch.
fn check_greedy(graph: &LayeredGraph, cfg: &ReferenceConfiguration) {
    let pos = |id: AgentId| cfg.position(id).unwrap();
    for l in 1..graph.layers.len() {
        let avail: Vec<AgentId> = graph.layers[..l].iter().flatten().copied().collect();
        let earlier: Vec<AgentId> = graph.layers[..l - 1].iter().flatten().copied().collect();
        for &id in &graph.layers[l] {
            let p = pos(id);
            let mut best: Option<(f64, [AgentId; 3])> = None;
            let mut sorted = avail.clone();
            sorted.sort();
            for a in 0..sorted.len() {
                for b in a + 1..sorted.len() {
                    for c in b + 1..sorted.len() {
                        let ids = [sorted[a], sorted[b], sorted[c]];
                        let t = ids.map(pos);
                        if area(t) <= 1e-12 || barycentric_min(p, t) < INTERIOR_MARGIN {
                            continue;
                        }
                        let key = (area(t), ids);
                        if best.is_none_or(|b| key.0 < b.0) {
                            best = Some(key);
                        }
                    }
                }
            }
            let (_, ids) = best.expect("follower has an enclosing triangle");
            assert_eq!(graph.in_neighbors[&id], ids.to_vec(), "follower {id}");
            // Not placeable one layer earlier.
            if l >= 2 {
                for a in 0..earlier.len() {
                    for b in a + 1..earlier.len() {
                        for c in b + 1..earlier.len() {
                            let t = [earlier[a], earlier[b], earlier[c]].map(pos);
                            assert!(area(t) <= 1e-12 || barycentric_min(p, t) < INTERIOR_MARGIN);
                        }
                    }
                }
            }
        }
    }
}

fn random_formation(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let corners = rng.random_range(3..=9);
    let mut angles: Vec<f64> = (0..corners).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let radius = rng.random_range(5.0..20.0);
    let mut pts: Vec<Vec2> = angles
        .iter()
        .map(|a| Vec2::new(radius * a.cos(), radius * a.sin()))
        .collect();
    let followers = rng.random_range(1..=25);
    for _ in 0..followers {
        let r = radius * 0.7 * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        pts.push(Vec2::new(r * a.cos(), r * a.sin()));
    }
    pts
}

#[test]
fn greedy_layers_are_minimal_and_min_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut built = 0;
    for _ in 0..300 {
        let pts = random_formation(&mut rng);
        let Ok(cfg) = config(&pts) else { continue };
        let Ok(graph) = LayeredGraph::build(&cfg) else { continue };
        assert!(validate_dnn(&graph, &cfg).is_valid());
        check_greedy(&graph, &cfg);
        built += 1;
    }
    assert!(built > 200, "only {built} formations were feasible");
}

#[test]
fn explicit_core_gives_deep_layers() {
    // With the core on the square's anti-diagonal, the center is grazed by
    // every leader triangle and waits for a layer-1 agent.
    let pts = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (1.0, 3.0), (2.0, 2.0), (3.0, 1.5), (0.5, 2.0)]
        .map(|(x, y)| Vec2::new(x, y));
    let cfg = config(&pts).unwrap();
    let boundary = [1, 2, 3, 4].map(AgentId);
    let graph = build_layers(&cfg, &boundary, AgentId(5)).unwrap();
    assert!(validate_dnn(&graph, &cfg).is_valid());
    assert_eq!(graph.layer_of(AgentId(6)), Some(2));
    check_greedy(&graph, &cfg);
    assert_eq!(build_layers(&cfg, &boundary, AgentId(5)).unwrap(), graph);
}
