//! Simulation oracles for polynomial ODEs: trajectories, empirical
//! region-of-attraction membership, set entry times and the converse
//! Lyapunov functions `V_β(x) = ∫₀^∞ ‖φ(x,t)‖^{2β} dt` and
//! `W_{λ,β}(x) = 1 − exp(−λ V_β(x))` (with `W = 1` off the region of attraction).

mod diagnostics;
mod field;
mod integrate;
mod oracle;
mod stability;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::PolyError;

pub(crate) use diagnostics::ball_samples;
pub use diagnostics::{estimate_theta, lipschitz_constant, max_difference_quotient, TheoryReport};
pub use field::VectorField;
pub use integrate::{flow, integrate, reverse_time_orbit, Terminal, Trajectory};
pub use oracle::{
    entry_time, roa_member, v_oracle, w_oracle, Membership, Oracle, OracleRow, OracleValue,
};
pub use stability::{local_stability, solve_lyapunov, LocalStability};

/// Bisection iterations used to locate a ball crossing inside one step.
pub const CROSSING_BISECTIONS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("vector field has no components")]
    EmptyField,
    #[error("component {component} of the vector field is {value} at the origin, expected 0")]
    NonzeroAtOrigin { component: usize, value: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error("linearization at the origin is not Hurwitz (max real part {max_real_part})")]
    NotHurwitz { max_real_part: f64 },
    #[error("entry radius {eta} exceeds the sampled quadratic basin radius {basin}")]
    EtaOutsideBasin { eta: f64, basin: f64 },
}

/// Simulation settings shared by all oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Radius of the target ball `B_η(0)`.
    pub eta: f64,
    /// Trajectories reaching this norm are reported as diverged.
    pub escape_radius: f64,
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Simulation continues after ball entry until the neglected tail of
    /// `∫‖φ‖^{2β}` is bounded by this.
    pub tail_tol: f64,
    /// Run membership queries even when the linearization is not Hurwitz.
    #[serde(default)]
    pub allow_non_hurwitz: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            eta: 0.1,
            escape_radius: 30.0,
            t_max: 100.0,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            tail_tol: 1e-11,
            allow_non_hurwitz: false,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidConfig(m.to_string()));
        if !(self.eta > 0.0 && self.eta < self.escape_radius) {
            return bad("require 0 < eta < escape_radius");
        }
        if !(self.t_max > 0.0) {
            return bad("t_max must be positive");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.tail_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}
