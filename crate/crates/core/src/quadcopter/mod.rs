//! Quadcopter motion model and feedback-linearizing tracking controller.
//!
//! The state carries thrust and its rate, so the inputs are the second
//! derivatives of thrust and of the three Euler angles. Differentiating the
//! position four times then exposes every input, which makes the map from
//! inputs to `[x⁗, y⁗, z⁗, ψ̈]` affine and (away from zero thrust and
//! vertical attitudes) invertible.

mod control;
mod model;

pub use control::{
    chain_a, chain_b, design_gains, is_hurwitz, tracking_control, ControllerGains, PoleSpec,
};
pub use model::{FlatState, Linearization, QuadState, Quadcopter, MAX_STEP};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("thrust {thrust} N is at or below the floor {floor} N")]
    ThrustFloor { thrust: f64, floor: f64 },
    #[error("attitude (roll {roll}, pitch {pitch}) rad is too close to vertical")]
    Attitude { roll: f64, pitch: f64 },
    #[error("input matrix is numerically singular")]
    Singular,
    #[error("time step {0} s is outside (0, 0.02]")]
    TimeStep(f64),
    #[error("pole {0} is not in the open left half-plane")]
    UnstablePole(f64),
    #[error("closed-loop matrix is not Hurwitz")]
    NotHurwitz,
    #[error("mass {0} kg must be positive")]
    Mass(f64),
}
