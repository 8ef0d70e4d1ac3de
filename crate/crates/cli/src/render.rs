//! Static SVG snapshots of a logged run.

use crate::scenario::ScenarioFile;
use dnncov::heatmap::eval_sdhm;
use dnncov::sim::Trajectory;
use dnncov::{LayeredGraph, Vec2};
use std::fmt::Write;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 30.0;
const GRID: usize = 160;
const CONTOUR_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
const MAX_PATH_POINTS: usize = 240;

#[derive(Debug, Clone, Copy)]
struct Frame {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = Vec2>) -> Self {
        let mut min = Vec2::repeat(f64::INFINITY);
        let mut max = Vec2::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(&p);
            max = max.sup(&p);
        }
        let pad = 0.05 * (max - min).max().max(1.0);
        min -= Vec2::repeat(pad);
        max += Vec2::repeat(pad);
        let span = max - min;
        let scale = (WIDTH - 2.0 * MARGIN) / span.x.max(span.y);
        Self {
            min,
            scale,
            height: span.y * scale + 2.0 * MARGIN + 20.0,
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let x = MARGIN + (p.x - self.min.x) * self.scale;
        let y = self.height - MARGIN - (p.y - self.min.y) * self.scale;
        (x, y)
    }

    fn world(&self, px: f64, py: f64) -> Vec2 {
        Vec2::new(
            self.min.x + (px - MARGIN) / self.scale,
            self.min.y + (self.height - MARGIN - py) / self.scale,
        )
    }
}

/// Everything a frame needs that does not depend on the time.
pub struct Scene<'a> {
    scenario: &'a ScenarioFile,
    graph: &'a LayeredGraph,
    traj: &'a Trajectory,
    frame: Frame,
    contours: String,
}

impl<'a> Scene<'a> {
    pub fn new(scenario: &'a ScenarioFile, graph: &'a LayeredGraph, traj: &'a Trajectory) -> Self {
        let frame = Frame::fit(
            scenario
                .reference
                .agents()
                .iter()
                .map(|a| a.position)
                .chain(scenario.boundary_targets.values().copied())
                .chain(scenario.zones.iter().flat_map(|z| z.polygon.iter().copied()))
                .chain(traj.samples.iter().flatten().map(|s| s.position.xy())),
        );
        let contours = contours(scenario, &frame);
        Self {
            scenario,
            graph,
            traj,
            frame,
            contours,
        }
    }

    /// SVG for the logged sample at index `k`.
    pub fn render(&self, k: usize) -> String {
        let f = &self.frame;
        let t = self.traj.times[k];
        let row = &self.traj.samples[k];
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#,
            w = WIDTH,
            h = f.height
        );
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&self.contours);

        for zone in &self.scenario.zones {
            let pts: Vec<String> = zone
                .polygon
                .iter()
                .map(|&p| {
                    let (x, y) = f.map(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                svg,
                r##"<polygon points="{}" fill="none" stroke="#2a7" stroke-width="1.5" stroke-dasharray="6 3"/>"##,
                pts.join(" ")
            );
        }
        for app in self.scenario.heat_map.applications() {
            for target in &app.targets {
                let (x, y) = f.map(target.mean());
                let _ = writeln!(
                    svg,
                    r##"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="#a22" stroke-width="1.5"/>"##,
                    x - 4.0,
                    y - 4.0,
                    x + 4.0,
                    y + 4.0,
                    x - 4.0,
                    y + 4.0,
                    x + 4.0,
                    y - 4.0
                );
            }
        }

        // Actual paths up to this time, thinned to a bounded number of points.
        let stride = k.div_ceil(MAX_PATH_POINTS).max(1);
        for i in 0..self.traj.ids.len() {
            let mut d = String::new();
            let mut ks: Vec<usize> = (0..=k).step_by(stride).collect();
            if ks.last() != Some(&k) {
                ks.push(k);
            }
            for (n, &j) in ks.iter().enumerate() {
                let (x, y) = f.map(self.traj.samples[j][i].position.xy());
                let _ = write!(d, "{}{x:.2},{y:.2}", if n == 0 { 'M' } else { 'L' });
            }
            let _ = writeln!(
                svg,
                r##"<path d="{d}" fill="none" stroke="#999" stroke-width="0.8" stroke-dasharray="3 2"/>"##
            );
        }

        for (id, neighbors) in &self.graph.in_neighbors {
            let Some(i) = self.traj.agent_index(*id) else {
                continue;
            };
            let (x1, y1) = f.map(row[i].position.xy());
            for n in neighbors {
                let Some(j) = self.traj.agent_index(*n) else {
                    continue;
                };
                let (x2, y2) = f.map(row[j].position.xy());
                let _ = writeln!(
                    svg,
                    r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#48c" stroke-width="0.6" stroke-opacity="0.6"/>"##
                );
            }
        }

        for (i, id) in self.traj.ids.iter().enumerate() {
            let (x, y) = f.map(row[i].position.xy());
            let (r, fill) = if *id == self.graph.core_id {
                (5.0, "#e80")
            } else if self.graph.is_leader(*id) {
                (4.5, "#c22")
            } else {
                (3.0, "#236")
            };
            let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"/>"#);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{} t = {t:.1} s</text>"#,
            escape(&self.scenario.name)
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Iso-lines of the heat map at fixed fractions of its sampled maximum.
fn contours(scenario: &ScenarioFile, f: &Frame) -> String {
    let (x0, x1) = (MARGIN, WIDTH - MARGIN);
    let (y0, y1) = (f.height - MARGIN, MARGIN + 20.0);
    let px = |i: usize| x0 + (x1 - x0) * i as f64 / GRID as f64;
    let py = |j: usize| y0 + (y1 - y0) * j as f64 / GRID as f64;
    let values: Vec<Vec<f64>> = (0..=GRID)
        .map(|j| {
            (0..=GRID)
                .map(|i| eval_sdhm(f.world(px(i), py(j)), &scenario.heat_map))
                .collect()
        })
        .collect();
    let peak = values.iter().flatten().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return String::new();
    }
    let mut out = String::new();
    for (n, frac) in CONTOUR_LEVELS.iter().enumerate() {
        let level = frac * peak;
        let mut d = String::new();
        for j in 0..GRID {
            for i in 0..GRID {
                let corners = [
                    (px(i), py(j), values[j][i]),
                    (px(i + 1), py(j), values[j][i + 1]),
                    (px(i + 1), py(j + 1), values[j + 1][i + 1]),
                    (px(i), py(j + 1), values[j + 1][i]),
                ];
                let mut cuts = Vec::with_capacity(4);
                for e in 0..4 {
                    let (ax, ay, av) = corners[e];
                    let (bx, by, bv) = corners[(e + 1) % 4];
                    if (av >= level) != (bv >= level) {
                        let s = (level - av) / (bv - av);
                        cuts.push((ax + s * (bx - ax), ay + s * (by - ay)));
                    }
                }
                let pairs: &[(usize, usize)] = match cuts.len() {
                    2 => &[(0, 1)],
                    4 => {
                        let center = corners.iter().map(|c| c.2).sum::<f64>() / 4.0;
                        if (center >= level) == (corners[0].2 >= level) {
                            &[(0, 1), (2, 3)]
                        } else {
                            &[(0, 3), (1, 2)]
                        }
                    }
                    _ => &[],
                };
                for &(a, b) in pairs {
                    let _ = write!(
                        d,
                        "M{:.2},{:.2}L{:.2},{:.2}",
                        cuts[a].0, cuts[a].1, cuts[b].0, cuts[b].1
                    );
                }
            }
        }
        if !d.is_empty() {
            let opacity = 0.3 + 0.7 * n as f64 / (CONTOUR_LEVELS.len() - 1) as f64;
            let _ = writeln!(
                out,
                r##"<path d="{d}" fill="none" stroke="#f60" stroke-width="1" stroke-opacity="{opacity:.2}"/>"##
            );
        }
    }
    out
}
