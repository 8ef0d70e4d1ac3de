//! Service demand as a priority-weighted mixture of Gaussian target maps,
//! and moment integration of such densities over convex polygons.

use crate::geometry::{is_strictly_convex_ccw, polygon_signed_area, vertex_mean};
use crate::Vec2;
use nalgebra::Matrix2;
use std::f64::consts::PI;
use thiserror::Error;

/// Tolerance on the unit sum of application priorities.
pub const PRIORITY_SUM_TOL: f64 = 1e-9;
/// Default relative agreement between successive quadrature refinements.
pub const DEFAULT_QUAD_TOL: f64 = 1e-6;
/// Polygons below this area (m²) cannot be integrated.
pub const MIN_REGION_AREA: f64 = 1e-12;

const MAX_DEPTH: u32 = 24;
/// Beyond this many standard deviations a Gaussian is treated as negligible
/// when deciding where to force refinement.
const REACH_SIGMAS: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatMapError {
    #[error("covariance {cov:?} is not symmetric positive definite")]
    Covariance { cov: [[f64; 2]; 2] },
    #[error("target mean must be finite")]
    NonFiniteMean,
    #[error("application {app} has priority {alpha}, outside [0, 1]")]
    Priority { app: usize, alpha: f64 },
    #[error("application priorities must sum to 1 (got {sum})")]
    PrioritySum { sum: f64 },
    #[error("application {0} has no targets")]
    NoTargets(usize),
    #[error("heat map needs at least one application")]
    NoApplications,
    #[error("region area {area:e} m² is too small to integrate")]
    DegenerateRegion { area: f64 },
    #[error("region is not a convex counter-clockwise polygon")]
    NotConvex,
}

/// Bivariate normal density with precomputed inverse covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mean: Vec2,
    cov: Matrix2<f64>,
    inv: Matrix2<f64>,
    norm: f64,
    std_min: f64,
    std_max: f64,
}

impl GaussianTarget {
    pub fn new(mean: Vec2, cov: [[f64; 2]; 2]) -> Result<Self, HeatMapError> {
        if !(mean.x.is_finite() && mean.y.is_finite()) {
            return Err(HeatMapError::NonFiniteMean);
        }
        let bad = || HeatMapError::Covariance { cov };
        let [[sxx, sxy], [syx, syy]] = cov;
        if ![sxx, sxy, syx, syy].iter().all(|v| v.is_finite()) {
            return Err(bad());
        }
        if (sxy - syx).abs() > 1e-12 * (sxx.abs() + syy.abs()) {
            return Err(bad());
        }
        let det = sxx * syy - sxy * syx;
        if !(sxx > 0.0 && det > 0.0) {
            return Err(bad());
        }
        let m = Matrix2::new(sxx, sxy, syx, syy);
        let half_trace = 0.5 * (sxx + syy);
        let disc = (half_trace * half_trace - det).max(0.0).sqrt();
        let (lmin, lmax) = (half_trace - disc, half_trace + disc);
        if !(lmin > 0.0) {
            return Err(bad());
        }
        Ok(Self {
            mean,
            cov: m,
            inv: Matrix2::new(syy, -sxy, -syx, sxx) / det,
            norm: 1.0 / (2.0 * PI * det.sqrt()),
            std_min: lmin.sqrt(),
            std_max: lmax.sqrt(),
        })
    }

    pub fn mean(&self) -> Vec2 {
        self.mean
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[self.cov[(0, 0)], self.cov[(0, 1)]], [self.cov[(1, 0)], self.cov[(1, 1)]]]
    }

    pub fn std_max(&self) -> f64 {
        self.std_max
    }

    pub fn std_min(&self) -> f64 {
        self.std_min
    }

    pub fn density(&self, r: Vec2) -> f64 {
        let d = r - self.mean;
        let q = d.dot(&(self.inv * d));
        self.norm * (-0.5 * q).exp()
    }
}

/// One service application: equally weighted targets and a priority.
#[derive(Debug, Clone, PartialEq)]
pub struct Application {
    pub alpha: f64,
    pub targets: Vec<GaussianTarget>,
}

impl Application {
    /// Average of the target densities; integrates to 1 over the plane.
    pub fn density(&self, r: Vec2) -> f64 {
        let sum: f64 = self.targets.iter().map(|t| t.density(r)).sum();
        sum / self.targets.len() as f64
    }
}

/// Evaluates one application's mixture at `r`.
pub fn eval_component(r: Vec2, app: &Application) -> f64 {
    app.density(r)
}

/// The full demand field `Σ α_j H_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    applications: Vec<Application>,
}

impl HeatMap {
    pub fn new(applications: Vec<Application>) -> Result<Self, HeatMapError> {
        if applications.is_empty() {
            return Err(HeatMapError::NoApplications);
        }
        for (k, app) in applications.iter().enumerate() {
            if !(0.0..=1.0).contains(&app.alpha) {
                return Err(HeatMapError::Priority {
                    app: k,
                    alpha: app.alpha,
                });
            }
            if app.targets.is_empty() {
                return Err(HeatMapError::NoTargets(k));
            }
        }
        let sum: f64 = applications.iter().map(|a| a.alpha).sum();
        if (sum - 1.0).abs() > PRIORITY_SUM_TOL {
            return Err(HeatMapError::PrioritySum { sum });
        }
        Ok(Self { applications })
    }

    pub fn applications(&self) -> &[Application] {
        &self.applications
    }
}

/// Evaluates the priority-weighted demand field at `r`.
pub fn eval_sdhm(r: Vec2, map: &HeatMap) -> f64 {
    map.applications
        .iter()
        .map(|a| a.alpha * a.density(r))
        .sum()
}

/// Where a density varies on short length scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub center: Vec2,
    /// Shortest variation length, m.
    pub scale: f64,
    /// Distance beyond which the feature is negligible, m.
    pub reach: f64,
}

/// A nonnegative planar density the quadrature can integrate.
pub trait Density: Sync {
    fn density(&self, r: Vec2) -> f64;

    /// Sharp features the integrator must resolve before trusting its
    /// error estimate. Smooth densities need none.
    fn features(&self) -> Vec<Feature> {
        Vec::new()
    }
}

impl Density for HeatMap {
    fn density(&self, r: Vec2) -> f64 {
        eval_sdhm(r, self)
    }

    fn features(&self) -> Vec<Feature> {
        self.applications
            .iter()
            .filter(|a| a.alpha > 0.0)
            .flat_map(|a| a.targets.iter())
            .map(|t| Feature {
                center: t.mean,
                scale: t.std_min,
                reach: REACH_SIGMAS * t.std_max,
            })
            .collect()
    }
}

impl Density for Application {
    fn density(&self, r: Vec2) -> f64 {
        Application::density(self, r)
    }

    fn features(&self) -> Vec<Feature> {
        self.targets
            .iter()
            .map(|t| Feature {
                center: t.mean,
                scale: t.std_min,
                reach: REACH_SIGMAS * t.std_max,
            })
            .collect()
    }
}

impl Density for GaussianTarget {
    fn density(&self, r: Vec2) -> f64 {
        GaussianTarget::density(self, r)
    }

    fn features(&self) -> Vec<Feature> {
        vec![Feature {
            center: self.mean,
            scale: self.std_min,
            reach: REACH_SIGMAS * self.std_max,
        }]
    }
}

/// Constant density, 1/m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform(pub f64);

impl Density for Uniform {
    fn density(&self, _r: Vec2) -> f64 {
        self.0
    }
}

/// Zeroth and first moments of a density over a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `∫ H dr`
    pub mass: f64,
    /// `∫ r H dr`
    pub first_moment: Vec2,
    /// `∫ dr`
    pub area: f64,
}

impl Moments {
    /// Density-weighted centroid, if the mass is positive.
    pub fn centroid(&self) -> Option<Vec2> {
        (self.mass > 0.0).then(|| self.first_moment / self.mass)
    }
}

// Degree-5 seven-point rule on the triangle (Radon): barycentric orbits
// (1/3,1/3,1/3), (a,a,1-2a) for two values of a.
struct Rule {
    bary: [[f64; 3]; 7],
    weight: [f64; 7],
}

fn rule() -> &'static Rule {
    use std::sync::OnceLock;
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = (9.0 + 2.0 * s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = (9.0 - 2.0 * s15) / 21.0;
        let w0 = 9.0 / 40.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        Rule {
            bary: [
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weight: [w0, w1, w1, w1, w2, w2, w2],
        }
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    mass: f64,
    mx: f64,
    my: f64,
}

impl std::ops::Add for Acc {
    type Output = Acc;
    fn add(self, o: Acc) -> Acc {
        Acc {
            mass: self.mass + o.mass,
            mx: self.mx + o.mx,
            my: self.my + o.my,
        }
    }
}

/// Moments relative to `origin` by one application of the seven-point rule.
fn apply_rule<D: Density + ?Sized>(d: &D, tri: &[Vec2; 3], origin: Vec2) -> Acc {
    let r = rule();
    let area = 0.5 * ((tri[1] - tri[0]).perp(&(tri[2] - tri[0]))).abs();
    let mut acc = Acc::default();
    for k in 0..7 {
        let [l0, l1, l2] = r.bary[k];
        let p = l0 * tri[0] + l1 * tri[1] + l2 * tri[2];
        let h = r.weight[k] * d.density(p);
        let q = p - origin;
        acc.mass += h;
        acc.mx += h * q.x;
        acc.my += h * q.y;
    }
    Acc {
        mass: acc.mass * area,
        mx: acc.mx * area,
        my: acc.my * area,
    }
}

fn split(tri: &[Vec2; 3]) -> [[Vec2; 3]; 4] {
    let [a, b, c] = *tri;
    let ab = 0.5 * (a + b);
    let bc = 0.5 * (b + c);
    let ca = 0.5 * (c + a);
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

fn diameter(tri: &[Vec2; 3]) -> f64 {
    (tri[0] - tri[1])
        .norm()
        .max((tri[1] - tri[2]).norm())
        .max((tri[2] - tri[0]).norm())
}

fn distance_to_triangle(p: Vec2, tri: &[Vec2; 3]) -> f64 {
    let inside = {
        let s0 = (tri[1] - tri[0]).perp(&(p - tri[0]));
        let s1 = (tri[2] - tri[1]).perp(&(p - tri[1]));
        let s2 = (tri[0] - tri[2]).perp(&(p - tri[2]));
        (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
    };
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|k| {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (p - (a + t * ab)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

struct Integrator<'a, D: ?Sized> {
    density: &'a D,
    features: Vec<Feature>,
    origin: Vec2,
    length: f64,
}

impl<D: Density + ?Sized> Integrator<'_, D> {
    /// A triangle that is large compared to a nearby feature cannot be
    /// trusted to the error estimate: both rule levels may miss the peak.
    fn unresolved(&self, tri: &[Vec2; 3]) -> bool {
        let diam = diameter(tri);
        self.features
            .iter()
            .any(|f| diam > 2.0 * f.scale && distance_to_triangle(f.center, tri) < f.reach)
    }

    /// Rule applied at the resolution the features demand.
    fn resolved(&self, tri: &[Vec2; 3], depth: u32) -> Acc {
        if depth < MAX_DEPTH && self.unresolved(tri) {
            split(tri)
                .iter()
                .map(|t| self.resolved(t, depth + 1))
                .fold(Acc::default(), |a, b| a + b)
        } else {
            apply_rule(self.density, tri, self.origin)
        }
    }

    fn adaptive(&self, tri: &[Vec2; 3], coarse: Acc, tol: f64, depth: u32) -> Acc {
        let children = split(tri);
        let parts: Vec<Acc> = children
            .iter()
            .map(|t| apply_rule(self.density, t, self.origin))
            .collect();
        let fine = parts.iter().fold(Acc::default(), |a, &b| a + b);
        let err = (fine.mass - coarse.mass)
            .abs()
            .max((fine.mx - coarse.mx).abs() / self.length)
            .max((fine.my - coarse.my).abs() / self.length);
        if err <= tol || depth >= MAX_DEPTH {
            return fine;
        }
        children
            .iter()
            .zip(parts)
            .map(|(t, c)| self.adaptive(t, c, 0.25 * tol, depth + 1))
            .fold(Acc::default(), |a, b| a + b)
    }

    fn integrate(&self, tri: &[Vec2; 3], tol: f64, depth: u32) -> Acc {
        if depth < MAX_DEPTH && self.unresolved(tri) {
            return split(tri)
                .iter()
                .map(|t| self.integrate(t, 0.25 * tol, depth + 1))
                .fold(Acc::default(), |a, b| a + b);
        }
        let coarse = apply_rule(self.density, tri, self.origin);
        self.adaptive(tri, coarse, tol, depth)
    }
}

/// Integrates `∫ H`, `∫ r H` and `∫ 1` over a convex CCW polygon.
///
/// The polygon is fan-triangulated. Each triangle is first subdivided until it
/// resolves every nearby density feature, then refined dyadically until the
/// seven-point rule and its four-child refinement agree to `rel_tol` relative
/// to the polygon's total mass.
pub fn integrate_polygon<D: Density + ?Sized>(
    density: &D,
    polygon: &[Vec2],
    rel_tol: f64,
) -> Result<Moments, HeatMapError> {
    let area = polygon_signed_area(polygon);
    if polygon.len() < 3 || !(area.abs() >= MIN_REGION_AREA) {
        return Err(HeatMapError::DegenerateRegion { area });
    }
    if !is_strictly_convex_ccw(polygon) {
        return Err(HeatMapError::NotConvex);
    }

    let origin = vertex_mean(polygon);
    let length = polygon
        .iter()
        .map(|p| (p - origin).norm())
        .fold(0.0, f64::max);
    let integ = Integrator {
        density,
        features: density.features(),
        origin,
        length,
    };
    let fan: Vec<[Vec2; 3]> = (1..polygon.len() - 1)
        .map(|k| [polygon[0], polygon[k], polygon[k + 1]])
        .collect();

    let estimate = fan
        .iter()
        .map(|t| integ.resolved(t, 0))
        .fold(Acc::default(), |a, b| a + b);
    let scale = estimate.mass.abs().max(1e-14 * area);
    let total = fan
        .iter()
        .map(|t| {
            let share = 0.5 * ((t[1] - t[0]).perp(&(t[2] - t[0]))).abs() / area;
            integ.integrate(t, rel_tol * scale * share, 0)
        })
        .fold(Acc::default(), |a, b| a + b);

    Ok(Moments {
        mass: total.mass,
        first_moment: Vec2::new(total.mx, total.my) + total.mass * origin,
        area,
    })
}
