use super::QuadError;
use crate::{Vec3, GRAVITY};
use nalgebra::{Matrix3, Matrix4, SVector, Vector4};
use std::f64::consts::FRAC_PI_2;

pub(crate) const X: usize = 0;
pub(crate) const VX: usize = 3;
pub(crate) const PHI: usize = 6;
pub(crate) const THETA: usize = 7;
pub(crate) const PSI: usize = 8;
pub(crate) const DPHI: usize = 9;
pub(crate) const THRUST: usize = 12;
pub(crate) const DTHRUST: usize = 13;

/// Largest integration step accepted by [`Quadcopter::step`], s.
pub const MAX_STEP: f64 = 0.02;

/// `[x y z ẋ ẏ ż φ θ ψ φ̇ θ̇ ψ̇ f ḟ]`: position (m), velocity (m/s), roll,
/// pitch and yaw (rad), their rates (rad/s), thrust (N) and its rate (N/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState(pub SVector<f64, 14>);

impl QuadState {
    /// At rest at `position`, level, thrust balancing gravity.
    pub fn hover(position: Vec3, mass: f64) -> Self {
        let mut s = SVector::<f64, 14>::zeros();
        s.fixed_rows_mut::<3>(X).copy_from(&position);
        s[THRUST] = mass * GRAVITY;
        QuadState(s)
    }

    pub fn position(&self) -> Vec3 {
        self.0.fixed_rows::<3>(X).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.0.fixed_rows::<3>(VX).into_owned()
    }

    /// Roll, pitch, yaw.
    pub fn attitude(&self) -> Vec3 {
        self.0.fixed_rows::<3>(PHI).into_owned()
    }

    pub fn attitude_rates(&self) -> Vec3 {
        self.0.fixed_rows::<3>(DPHI).into_owned()
    }

    pub fn thrust(&self) -> f64 {
        self.0[THRUST]
    }

    pub fn thrust_rate(&self) -> f64 {
        self.0[DTHRUST]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// `[r ṙ r̈ r⃛ ψ ψ̇]`: the coordinates in which the closed loop is a set of
/// integrator chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatState(pub SVector<f64, 14>);

impl FlatState {
    /// Hold `position` at rest with the given yaw.
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        let mut z = SVector::<f64, 14>::zeros();
        z.fixed_rows_mut::<3>(0).copy_from(&position);
        z[12] = yaw;
        FlatState(z)
    }

    pub fn position(&self) -> Vec3 {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn acceleration(&self) -> Vec3 {
        self.0.fixed_rows::<3>(6).into_owned()
    }

    pub fn jerk(&self) -> Vec3 {
        self.0.fixed_rows::<3>(9).into_owned()
    }

    pub fn yaw(&self) -> f64 {
        self.0[12]
    }

    pub fn yaw_rate(&self) -> f64 {
        self.0[13]
    }
}

/// Input-output map `[x⁗ y⁗ z⁗ ψ̈]ᵀ = m1·u + m2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub m1: Matrix4<f64>,
    pub m2: Vector4<f64>,
    /// 2-norm condition number of `m1`.
    pub condition: f64,
}

/// Thrust direction `b = R e₃` for ZYX Euler angles, with its first and
/// second partial derivatives in (φ, θ, ψ).
struct ThrustAxis {
    b: Vec3,
    /// Columns ∂b/∂φ, ∂b/∂θ, ∂b/∂ψ.
    jac: Matrix3<f64>,
    /// `hess[k][l] = ∂²b/∂q_k∂q_l`.
    hess: [[Vec3; 3]; 3],
}

impl ThrustAxis {
    fn new(phi: f64, theta: f64, psi: f64) -> Self {
        let (sf, cf) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();

        let b = Vec3::new(sf * sp + cf * cp * st, cf * sp * st - sf * cp, cf * ct);

        let d_phi = Vec3::new(cf * sp - sf * cp * st, -sf * sp * st - cf * cp, -sf * ct);
        let d_theta = Vec3::new(cf * cp * ct, cf * sp * ct, -cf * st);
        let d_psi = Vec3::new(sf * cp - cf * sp * st, cf * cp * st + sf * sp, 0.0);

        let pp = Vec3::new(-sf * sp - cf * cp * st, -cf * sp * st + sf * cp, -cf * ct);
        let tt = Vec3::new(-cf * cp * st, -cf * sp * st, -cf * ct);
        let ss = Vec3::new(-sf * sp - cf * cp * st, -cf * sp * st + sf * cp, 0.0);
        let pt = Vec3::new(-sf * cp * ct, -sf * sp * ct, sf * st);
        let ps = Vec3::new(cf * cp + sf * sp * st, -sf * cp * st + cf * sp, 0.0);
        let ts = Vec3::new(-cf * sp * ct, cf * cp * ct, 0.0);

        ThrustAxis {
            b,
            jac: Matrix3::from_columns(&[d_phi, d_theta, d_psi]),
            hess: [[pp, pt, ps], [pt, tt, ts], [ps, ts, ss]],
        }
    }

    /// `Σ_kl ∂²b/∂q_k∂q_l · q̇_k q̇_l`
    fn quadratic(&self, rates: &Vec3) -> Vec3 {
        let mut acc = Vec3::zeros();
        for k in 0..3 {
            for l in 0..3 {
                acc += self.hess[k][l] * (rates[k] * rates[l]);
            }
        }
        acc
    }
}

/// One vehicle: mass and the envelope in which the controller may invert
/// its input map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadcopter {
    pub mass: f64,
    /// Thrust floor for linearization, N.
    pub min_thrust: f64,
    /// Required distance of roll and pitch from ±π/2 for linearization, rad.
    pub attitude_margin: f64,
}

impl Quadcopter {
    pub fn new(mass: f64) -> Result<Self, QuadError> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(QuadError::Mass(mass));
        }
        Ok(Self {
            mass,
            min_thrust: 0.1,
            attitude_margin: 0.05,
        })
    }

    pub fn hover(&self, position: Vec3) -> QuadState {
        QuadState::hover(position, self.mass)
    }

    /// State derivative for input `u = [f̈, φ̈, θ̈, ψ̈]`.
    pub fn derivative(&self, s: &QuadState, u: &Vector4<f64>) -> Result<SVector<f64, 14>, QuadError> {
        if !s.is_finite() {
            return Err(QuadError::NonFinite { what: "state" });
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(QuadError::NonFinite { what: "input" });
        }
        Ok(self.vector_field(&s.0, u))
    }

    fn vector_field(&self, x: &SVector<f64, 14>, u: &Vector4<f64>) -> SVector<f64, 14> {
        let (sf, cf) = x[PHI].sin_cos();
        let (st, ct) = x[THETA].sin_cos();
        let (sp, cp) = x[PSI].sin_cos();
        let a = x[THRUST] / self.mass;
        let mut dx = SVector::<f64, 14>::zeros();
        dx[0] = x[3];
        dx[1] = x[4];
        dx[2] = x[5];
        dx[3] = a * (sf * sp + cf * cp * st);
        dx[4] = a * (cf * sp * st - sf * cp);
        dx[5] = a * cf * ct - GRAVITY;
        dx[6] = x[9];
        dx[7] = x[10];
        dx[8] = x[11];
        dx[9] = u[1];
        dx[10] = u[2];
        dx[11] = u[3];
        dx[12] = x[DTHRUST];
        dx[13] = u[0];
        dx
    }

    /// Classical fourth-order Runge–Kutta step with `u` held constant.
    pub fn step(&self, s: &QuadState, u: &Vector4<f64>, dt: f64) -> Result<QuadState, QuadError> {
        if !(dt > 0.0 && dt <= MAX_STEP) {
            return Err(QuadError::TimeStep(dt));
        }
        self.rk4(s, u, dt)
    }

    /// RK4 without the step-size guard; used for fine-grained probing.
    pub(crate) fn rk4(&self, s: &QuadState, u: &Vector4<f64>, dt: f64) -> Result<QuadState, QuadError> {
        let x = &s.0;
        let k1 = self.derivative(s, u)?;
        let k2 = self.vector_field(&(x + 0.5 * dt * k1), u);
        let k3 = self.vector_field(&(x + 0.5 * dt * k2), u);
        let k4 = self.vector_field(&(x + dt * k3), u);
        let next = QuadState(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        if !next.is_finite() {
            return Err(QuadError::NonFinite { what: "integrated state" });
        }
        Ok(next)
    }

    fn check_envelope(&self, s: &QuadState, margin: f64) -> Result<(), QuadError> {
        if !s.is_finite() {
            return Err(QuadError::NonFinite { what: "state" });
        }
        let (roll, pitch) = (s.0[PHI], s.0[THETA]);
        let limit = FRAC_PI_2 - margin;
        if roll.abs() >= limit || pitch.abs() >= limit {
            return Err(QuadError::Attitude { roll, pitch });
        }
        Ok(())
    }

    /// Position and its first three derivatives along the dynamics, plus yaw.
    pub fn flat_state(&self, s: &QuadState) -> Result<FlatState, QuadError> {
        self.check_envelope(s, 0.0)?;
        let att = s.attitude();
        let axis = ThrustAxis::new(att.x, att.y, att.z);
        let f = s.thrust();
        let accel = axis.b * (f / self.mass) - Vec3::new(0.0, 0.0, GRAVITY);
        let jerk = (axis.b * s.thrust_rate() + axis.jac * s.attitude_rates() * f) / self.mass;

        let mut z = SVector::<f64, 14>::zeros();
        z.fixed_rows_mut::<3>(0).copy_from(&s.position());
        z.fixed_rows_mut::<3>(3).copy_from(&s.velocity());
        z.fixed_rows_mut::<3>(6).copy_from(&accel);
        z.fixed_rows_mut::<3>(9).copy_from(&jerk);
        z[12] = att.z;
        z[13] = s.0[11];
        Ok(FlatState(z))
    }

    /// The affine map from inputs to the fourth position derivative and the
    /// yaw acceleration.
    pub fn linearizing_matrices(&self, s: &QuadState) -> Result<Linearization, QuadError> {
        self.check_envelope(s, self.attitude_margin)?;
        let f = s.thrust();
        if !(f > self.min_thrust) {
            return Err(QuadError::ThrustFloor {
                thrust: f,
                floor: self.min_thrust,
            });
        }
        let att = s.attitude();
        let rates = s.attitude_rates();
        let axis = ThrustAxis::new(att.x, att.y, att.z);
        let inv_m = 1.0 / self.mass;

        let mut m1 = Matrix4::<f64>::zeros();
        m1.fixed_view_mut::<3, 1>(0, 0).copy_from(&(axis.b * inv_m));
        m1.fixed_view_mut::<3, 3>(0, 1).copy_from(&(axis.jac * (f * inv_m)));
        m1[(3, 3)] = 1.0;

        let drift = (axis.jac * rates * (2.0 * s.thrust_rate()) + axis.quadratic(&rates) * f) * inv_m;
        let m2 = Vector4::new(drift.x, drift.y, drift.z, 0.0);

        let sv = m1.singular_values();
        let smin = sv.min();
        if !(smin > 0.0) {
            return Err(QuadError::Singular);
        }
        Ok(Linearization {
            m1,
            m2,
            condition: sv.max() / smin,
        })
    }
}
