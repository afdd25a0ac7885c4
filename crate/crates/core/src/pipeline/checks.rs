//! Pointwise checks of what a certificate claims, on random points of the
//! ball `B_R`. These do not depend on the SOS multipliers at all.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Certificate;
use crate::dynamics::{ball_samples, DynamicsError, Membership, Oracle, OracleConfig, VectorField};
use crate::poly::lie_derivative;

pub const DECREASE_TOL: f64 = 1e-6;
pub const BOUNDARY_TOL: f64 = 1e-6;
pub const ORIGIN_TOL: f64 = 1e-8;
pub const NONNEG_TOL: f64 = 1e-6;
pub const DOMINANCE_TOL: f64 = 1e-4;

/// Point counts for [`check_constraints`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckPlan {
    pub interior: usize,
    pub sphere: usize,
    pub dominance: usize,
    /// Cap on ball samples drawn while looking for converged points.
    pub dominance_attempts: usize,
    pub seed: u64,
}

impl Default for CheckPlan {
    fn default() -> Self {
        CheckPlan {
            interior: 1000,
            sphere: 200,
            dominance: 500,
            dominance_attempts: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintChecks {
    pub plan: CheckPlan,
    /// `max (∇P_dᵀf + λ‖x‖^{2β}(1 − P_d)) / scale` over the interior points,
    /// with `scale = max(1, |∇P_dᵀf|, λ‖x‖^{2β}|1 − P_d|)`.
    pub decrease_violation: f64,
    pub boundary_min: f64,
    pub origin_value: f64,
    pub interior_min: f64,
    /// `max (W(x) − P_d(x))` over converged points.
    pub dominance_violation: f64,
    pub dominance_points: usize,
    pub passed: bool,
}

fn sphere_points(n: usize, r: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    ball_samples(n, r, count, seed)
        .into_iter()
        .map(|x| {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            x.iter().map(|v| v * r / norm).collect()
        })
        .collect()
}

pub fn check_constraints(
    cert: &Certificate,
    f: &VectorField,
    cfg: &OracleConfig,
    plan: CheckPlan,
) -> Result<ConstraintChecks, DynamicsError> {
    let n = cert.nvars();
    let r = cert.spec.radius;
    let (lambda, beta) = (cert.spec.lambda, cert.spec.beta);
    let lie = lie_derivative(&cert.p_d, f)?;
    let interior = ball_samples(n, r, plan.interior, plan.seed);
    let decrease_violation = interior
        .par_iter()
        .map(|x| {
            let p = cert.eval(x);
            let a = lie.eval(x).expect("dimension checked");
            let b = lambda * x.iter().map(|v| v * v).sum::<f64>().powi(beta as i32) * (1.0 - p);
            (a + b) / 1f64.max(a.abs()).max(b.abs())
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let interior_min = interior
        .iter()
        .map(|x| cert.eval(x))
        .fold(f64::INFINITY, f64::min);
    let sphere = sphere_points(n, r, plan.sphere, plan.seed ^ 0x5151);
    let boundary_min = sphere
        .iter()
        .map(|x| cert.eval(x))
        .fold(f64::INFINITY, f64::min);
    let origin_value = cert.eval(&vec![0.0; n]);

    let oracle = Oracle::new(f, cfg)?;
    let mut dominance_violation = f64::NEG_INFINITY;
    let mut dominance_points = 0;
    let mut round = 0u64;
    let batch_size = plan.dominance.max(64);
    while dominance_points < plan.dominance
        && (round as usize) * batch_size < plan.dominance_attempts
    {
        let batch = ball_samples(n, r, batch_size, plan.seed ^ 0xd0d0 ^ (round << 32));
        round += 1;
        let rows = oracle.evaluate_batch(&batch, lambda, beta);
        for row in rows.into_iter().flatten() {
            if row.membership == Membership::Converged && dominance_points < plan.dominance {
                dominance_points += 1;
                dominance_violation = dominance_violation.max(row.w.value - cert.eval(&row.point));
            }
        }
    }
    let passed = decrease_violation <= DECREASE_TOL
        && boundary_min >= 1.0 - BOUNDARY_TOL
        && origin_value >= -ORIGIN_TOL
        && interior_min >= -NONNEG_TOL
        && dominance_violation <= DOMINANCE_TOL;
    Ok(ConstraintChecks {
        plan,
        decrease_violation,
        boundary_min,
        origin_value,
        interior_min,
        dominance_violation,
        dominance_points,
        passed,
    })
}
