use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ConstraintChecks, RoaSpec, VerificationReport};
use crate::dynamics::TheoryReport;
use crate::metrics::VolumeEstimate;
use crate::poly::{norm_power, Poly, PolyError};
use crate::sdp::{write_problem, SdpProblem, SdpSolution, SolveStatus};
use crate::sos::{DegreePlan, IdentityResiduals, Role};

/// Format tag written into every certificate document.
pub const CERTIFICATE_FORMAT: &str = "roacert-certificate/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateStatus {
    /// Identities hold; not yet checked against trajectories.
    Unchecked,
    /// Identity residuals exceed tolerance.
    Unverified,
    /// No sampled point of the inner set diverged.
    Verified,
    /// The inner set contains no sample point. Vacuously verified.
    Empty,
    /// Some sampled point of the inner set diverged.
    Falsified,
}

impl CertificateStatus {
    /// Verified or vacuously verified.
    pub fn is_verified(self) -> bool {
        matches!(self, CertificateStatus::Verified | CertificateStatus::Empty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub reductions: usize,
    pub tol: f64,
    pub rows: usize,
    pub psd_blocks: Vec<usize>,
    pub free: usize,
    /// SHA-256 of the problem in SDPTXT form.
    pub problem_sha256: String,
}

impl SolverInfo {
    pub fn from_solution(s: &SdpSolution, problem: &SdpProblem, tol: f64) -> SolverInfo {
        SolverInfo {
            status: s.status,
            iterations: s.iterations,
            primal_objective: s.primal_objective,
            dual_objective: s.dual_objective,
            gap: s.gap,
            primal_infeasibility: s.primal_infeasibility,
            dual_infeasibility: s.dual_infeasibility,
            reductions: s.reductions,
            tol,
            rows: problem.n_rows(),
            psd_blocks: problem.psd_blocks.clone(),
            free: problem.n_free,
            problem_sha256: hex::encode(Sha256::digest(write_problem(problem).as_bytes())),
        }
    }
}

/// `P_d` with its multipliers, checks and estimates.
///
/// The certified inner approximation is `{x : ‖x‖ < R, P_d(x) < 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub spec: RoaSpec,
    pub plan: DegreePlan,
    pub p_d: Poly,
    /// Constant already added to `P_d`.
    pub margin: f64,
    pub s: Poly,
    pub p: Poly,
    pub k1: Poly,
    pub k2: Poly,
    /// `∫_Λ P_d` as reported by the solver, before the margin.
    pub objective: f64,
    pub residuals: IdentityResiduals,
    pub gram_min_eigenvalues: Vec<(Role, f64)>,
    pub solver: SolverInfo,
    pub status: CertificateStatus,
    pub verification: Option<VerificationReport>,
    /// Optional second verification on a tensor grid.
    #[serde(default)]
    pub grid_verification: Option<VerificationReport>,
    pub checks: Option<ConstraintChecks>,
    /// `μ({P_d < 1} ∩ B_R ∩ Λ)`.
    pub volume: Option<VolumeEstimate>,
    pub theory: Option<TheoryReport>,
    /// Git-style SHA-256 of the problem file the run came from.
    #[serde(default)]
    pub problem_file_sha256: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    certificate: Certificate,
}

impl Certificate {
    /// Raises `P_d` by `c` and adjusts `k₁` and `k₂` so both identities still
    /// hold: `k₁ += λc‖x‖^{2β}` and `k₂ += c`. The added terms are SOS, so the
    /// inner set only shrinks.
    pub fn harden(&mut self, c: f64) -> Result<(), PolyError> {
        let n = self.p_d.nvars();
        let one = Poly::constant(n, c);
        self.p_d = self.p_d.add(&one)?;
        self.k2 = self.k2.add(&one)?;
        self.k1 = self
            .k1
            .add(&norm_power(n, self.spec.beta).scale(self.spec.lambda * c))?;
        self.margin += c;
        Ok(())
    }

    pub fn nvars(&self) -> usize {
        self.p_d.nvars()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.p_d
            .eval(x)
            .expect("point dimension matches certificate")
    }

    /// Membership in `{‖x‖ < R, P_d(x) < 1}`.
    pub fn contains(&self, x: &[f64]) -> bool {
        let r2 = self.spec.radius * self.spec.radius;
        x.iter().map(|v| v * v).sum::<f64>() < r2 && self.eval(x) < 1.0
    }

    /// Smallest Gram eigenvalue over all SOS blocks.
    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.gram_min_eigenvalues
            .iter()
            .map(|e| e.1)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        let doc = Document {
            format: CERTIFICATE_FORMAT.into(),
            certificate: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("certificate serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Certificate, serde_json::Error> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format != CERTIFICATE_FORMAT {
            return Err(serde::de::Error::custom(format!(
                "unknown certificate format {:?}",
                doc.format
            )));
        }
        Ok(doc.certificate)
    }
}
