use super::model::{FlatState, Quadcopter, QuadState};
use super::QuadError;
use nalgebra::{DMatrix, DVector, SMatrix, Vector4};

pub type GainMatrix = SMatrix<f64, 4, 14>;
pub type FlatMatrix = SMatrix<f64, 14, 14>;

/// Closed-loop poles for each translational 4-integrator chain and for the
/// yaw 2-integrator chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleSpec {
    pub translational: [f64; 4],
    pub yaw: [f64; 2],
}

impl Default for PoleSpec {
    fn default() -> Self {
        Self {
            translational: [-2.0, -2.5, -3.0, -3.5],
            yaw: [-3.0, -4.0],
        }
    }
}

impl PoleSpec {
    /// Real part of the slowest requested pole.
    pub fn slowest(&self) -> f64 {
        self.translational
            .iter()
            .chain(&self.yaw)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Chain-of-integrators drift matrix.
pub fn chain_a() -> FlatMatrix {
    let mut a = FlatMatrix::zeros();
    for k in 0..9 {
        a[(k, k + 3)] = 1.0;
    }
    a[(12, 13)] = 1.0;
    a
}

pub fn chain_b() -> SMatrix<f64, 14, 4> {
    let mut b = SMatrix::<f64, 14, 4>::zeros();
    for k in 0..3 {
        b[(9 + k, k)] = 1.0;
    }
    b[(13, 3)] = 1.0;
    b
}

/// Linear feedback `w = K(z_d − z)` on the flat coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    k: GainMatrix,
}

impl ControllerGains {
    /// Accepts `k` only if `A − BK` is Hurwitz.
    pub fn new(k: GainMatrix) -> Result<Self, QuadError> {
        let gains = Self { k };
        if !is_hurwitz(&gains.closed_loop()) {
            return Err(QuadError::NotHurwitz);
        }
        Ok(gains)
    }

    pub fn matrix(&self) -> &GainMatrix {
        &self.k
    }

    pub fn closed_loop(&self) -> FlatMatrix {
        chain_a() - chain_b() * self.k
    }

    /// Dimension of the eigenspace of `A − BK` at the real value `lambda`:
    /// the number of singular values of `A − BK − λI` below `tol`.
    pub fn eigenspace_dimension(&self, lambda: f64, tol: f64) -> usize {
        let shifted = self.closed_loop() - FlatMatrix::identity() * lambda;
        shifted.singular_values().iter().filter(|&&s| s < tol).count()
    }

    /// Input that makes the flat state follow `target` with the designed poles.
    pub fn control(
        &self,
        model: &Quadcopter,
        s: &QuadState,
        target: &FlatState,
    ) -> Result<Vector4<f64>, QuadError> {
        let lin = model.linearizing_matrices(s)?;
        let z = model.flat_state(s)?;
        let w = self.k * (target.0 - z.0);
        let u = lin.m1.lu().solve(&(w - lin.m2)).ok_or(QuadError::Singular)?;
        if !u.iter().all(|v| v.is_finite()) {
            return Err(QuadError::Singular);
        }
        Ok(u)
    }
}

/// Lyapunov test: `M` is Hurwitz iff `MᵀP + PM = −I` has a symmetric
/// positive definite solution `P`.
pub fn is_hurwitz(m: &FlatMatrix) -> bool {
    let n = 14;
    let mt = DMatrix::from_column_slice(n, n, m.transpose().as_slice());
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(MᵀP) = (I ⊗ Mᵀ) vec(P), vec(PM) = (Mᵀ ⊗ I) vec(P)
    let op = eye.kronecker(&mt) + mt.kronecker(&eye);
    let rhs = -DVector::from_column_slice(eye.as_slice());
    let Some(x) = op.lu().solve(&rhs) else {
        return false;
    };
    if !x.iter().all(|v| v.is_finite()) {
        return false;
    }
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    let sym = (&p + p.transpose()) * 0.5;
    sym.cholesky().is_some()
}

/// Monic polynomial coefficients `[c0, c1, …]` of `Π (s − p)`, lowest order first.
fn monic_coefficients(poles: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &p in poles {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= p * ck;
        }
        c = next;
    }
    c
}

/// Per-axis pole placement on the integrator chains.
pub fn design_gains(spec: &PoleSpec) -> Result<ControllerGains, QuadError> {
    for &p in spec.translational.iter().chain(&spec.yaw) {
        if !(p < 0.0 && p.is_finite()) {
            return Err(QuadError::UnstablePole(p));
        }
    }
    let t = monic_coefficients(&spec.translational);
    let y = monic_coefficients(&spec.yaw);
    let mut k = GainMatrix::zeros();
    for axis in 0..3 {
        for order in 0..4 {
            k[(axis, 3 * order + axis)] = t[order];
        }
    }
    k[(3, 12)] = y[0];
    k[(3, 13)] = y[1];
    ControllerGains::new(k)
}

/// `u = M₁⁻¹(K(z_d − z) − M₂)`.
pub fn tracking_control(
    model: &Quadcopter,
    s: &QuadState,
    target: &FlatState,
    gains: &ControllerGains,
) -> Result<Vector4<f64>, QuadError> {
    gains.control(model, s, target)
}
