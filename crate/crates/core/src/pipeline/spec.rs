use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::BoxDomain;

/// Relative slack on the corner test. Box corners that sit on the sphere up to
/// rounding are accepted.
pub const CORNER_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("beta must be at least 1")]
    Beta,
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("box has dimension {found}, the vector field has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("box corner {corner:?} has norm {norm}, not inside the ball of radius {radius}")]
    BoxOutsideBall {
        corner: Vec<f64>,
        norm: f64,
        radius: f64,
    },
}

/// Parameters of one certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaSpec {
    pub lambda: f64,
    pub beta: u32,
    pub radius: f64,
    pub domain: BoxDomain,
    pub degree: u32,
    /// Interior-point tolerance.
    pub tol: f64,
    /// Samples for inner-containment verification.
    pub samples: usize,
    /// Samples for the volume and `D_V` estimates.
    pub volume_samples: usize,
    pub seed: u64,
    /// Constant added to `P_d` after extraction, see [`super::Certificate::harden`].
    pub margin: f64,
}

impl RoaSpec {
    pub fn new(lambda: f64, beta: u32, radius: f64, domain: BoxDomain, degree: u32) -> RoaSpec {
        RoaSpec {
            lambda,
            beta,
            radius,
            domain,
            degree,
            tol: 1e-8,
            samples: 1000,
            volume_samples: 20_000,
            seed: 0,
            margin: 1e-6,
        }
    }

    pub fn with_degree(&self, degree: u32) -> RoaSpec {
        RoaSpec {
            degree,
            ..self.clone()
        }
    }

    pub fn validate(&self, nvars: usize) -> Result<(), SpecError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SpecError::Lambda(self.lambda));
        }
        if self.beta == 0 {
            return Err(SpecError::Beta);
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SpecError::Radius(self.radius));
        }
        if !(self.tol > 0.0) {
            return Err(SpecError::Tolerance(self.tol));
        }
        if self.domain.dim() != nvars {
            return Err(SpecError::Dimension {
                expected: nvars,
                found: self.domain.dim(),
            });
        }
        for corner in self.domain.corners() {
            let norm = corner.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > self.radius * (1.0 + CORNER_SLACK) {
                return Err(SpecError::BoxOutsideBall {
                    corner,
                    norm,
                    radius: self.radius,
                });
            }
        }
        Ok(())
    }
}
