//! Planar geometry shared by the formation and coverage stages.

use crate::Vec2;
use robust::Coord;

/// Sign-exact orientation of `c` relative to the directed line `a -> b`.
///
/// Positive when the three points turn counter-clockwise, negative when
/// clockwise and exactly zero when collinear.
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

fn coord(p: Vec2) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

/// Signed area of triangle `abc`, positive for counter-clockwise order.
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Signed area of a simple polygon (shoelace), positive when CCW.
pub fn polygon_signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

/// Indices of the strict convex-hull vertices of `points`, counter-clockwise,
/// starting from the lexicographically smallest point.
///
/// Points lying on a hull edge but not at a corner are not returned. Yields
/// `None` when fewer than three non-collinear points exist.
pub fn convex_hull(points: &[Vec2]) -> Option<Vec<usize>> {
    if points.len() < 3 {
        return None;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (points[i], points[j]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
    });

    // Andrew's monotone chain; popping on `<= 0` drops collinear points.
    let mut hull: Vec<usize> = Vec::with_capacity(2 * points.len());
    for &i in &order {
        while hull.len() >= 2
            && orient(
                points[hull[hull.len() - 2]],
                points[hull[hull.len() - 1]],
                points[i],
            ) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    let lower_len = hull.len() + 1;
    for &i in order.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && orient(
                points[hull[hull.len() - 2]],
                points[hull[hull.len() - 1]],
                points[i],
            ) <= 0.0
        {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();

    if hull.len() < 3 {
        None
    } else {
        Some(hull)
    }
}

/// True when `poly` is convex, counter-clockwise and has no repeated or
/// collinear consecutive vertices.
pub fn is_strictly_convex_ccw(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| orient(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) > 0.0)
}

/// Vertex average of a polygon.
pub fn vertex_mean(poly: &[Vec2]) -> Vec2 {
    let sum = poly.iter().fold(Vec2::zeros(), |acc, p| acc + p);
    sum / poly.len() as f64
}

/// True when `p` lies inside or on the boundary of the CCW convex polygon.
pub fn contains_convex(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    (0..n).all(|i| orient(poly[i], poly[(i + 1) % n], p) >= 0.0)
}
