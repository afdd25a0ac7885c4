//! spec → SDP → certificate → trajectory verification, and degree sweeps.

mod certificate;
mod checks;
mod spec;
mod verify;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    local_stability, DynamicsError, Membership, Oracle, OracleConfig, TheoryReport, VectorField,
};
use crate::metrics::{symmetric_difference, Samples, VolumeEstimate};
use crate::sdp::{solve_with, SdpError, SdpProblem, SdpSolution, SolveStatus, SolverSettings};
use crate::sos::{compile, extract_certificate, extract_unsolved, SosError};

pub use certificate::{Certificate, CertificateStatus, SolverInfo, CERTIFICATE_FORMAT};
pub use checks::{
    check_constraints, CheckPlan, ConstraintChecks, BOUNDARY_TOL, DECREASE_TOL, DOMINANCE_TOL,
    NONNEG_TOL, ORIGIN_TOL,
};
pub use spec::{RoaSpec, SpecError, CORNER_SLACK};
pub use verify::{
    apply_grid_verification, apply_verification, grid_points, verify_grid, verify_inner, OracleRoa,
    SampleDesign, VerificationReport, GRAZING_TOL,
};

/// Sample count for the non-rigorous constant estimates.
const THEORY_SAMPLES: usize = 2000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    /// The compiled problem and the solver output, for inspection.
    #[error("solver returned {status:?} at degree {degree}")]
    Solver {
        degree: u32,
        status: SolveStatus,
        problem: Box<SdpProblem>,
        solution: Box<SdpSolution>,
    },
    #[error("invalid degree list: {0}")]
    Degrees(String),
}

/// Compiles, solves and extracts, then adds the `RoaSpec` margin. No simulation.
pub fn certify(f: &VectorField, spec: &RoaSpec) -> Result<Certificate, PipelineError> {
    let prog = compile(spec, f)?;
    let solution = solve_with(&prog.problem, &SolverSettings::with_tol(spec.tol))?;
    if !solution.status.is_solved() {
        return Err(PipelineError::Solver {
            degree: spec.degree,
            status: solution.status,
            problem: Box::new(prog.problem),
            solution: Box::new(solution),
        });
    }
    let mut cert = extract_certificate(&prog, &solution)?;
    cert.harden(spec.margin).map_err(SosError::Poly)?;
    Ok(cert)
}

/// Polynomials read from a solution the solver did not accept, so a failed
/// run still leaves an `Unverified` certificate behind.
pub fn inspect_failure(
    f: &VectorField,
    spec: &RoaSpec,
    solution: &SdpSolution,
) -> Result<Certificate, PipelineError> {
    let prog = compile(spec, f)?;
    Ok(extract_unsolved(&prog, solution)?)
}

/// Full run: [`certify`], sampled constraint checks, inner verification,
/// volume and the constant estimates. Deterministic given `spec.seed`.
pub fn estimate_roa(
    f: &VectorField,
    spec: &RoaSpec,
    cfg: &OracleConfig,
) -> Result<Certificate, PipelineError> {
    spec.validate(f.nvars())?;
    let stability = local_stability(f, cfg.escape_radius);
    if !stability.hurwitz && !cfg.allow_non_hurwitz {
        return Err(DynamicsError::NotHurwitz {
            max_real_part: stability.max_real_part(),
        }
        .into());
    }
    let mut cert = certify(f, spec)?;
    cert.checks = Some(check_constraints(
        &cert,
        f,
        cfg,
        CheckPlan {
            seed: spec.seed,
            ..CheckPlan::default()
        },
    )?);
    let report = verify_inner(&cert, f, cfg, spec.samples, spec.seed)?;
    apply_verification(&mut cert, report);
    cert.volume = Some(Samples::new(&spec.domain, spec.volume_samples, spec.seed).volume(&cert));
    cert.theory = Some(TheoryReport::estimate(
        f,
        &stability,
        cfg.eta,
        spec.lambda,
        spec.beta,
        spec.radius,
        THEORY_SAMPLES,
        spec.seed,
    ));
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub degree: u32,
    pub status: Option<CertificateStatus>,
    pub objective: Option<f64>,
    /// `μ({P_d < 1} ∩ B_R ∩ Λ)`.
    pub volume: Option<VolumeEstimate>,
    /// `D_V` to the oracle region of attraction within `Λ`.
    pub dv: Option<VolumeEstimate>,
    pub diverged: Option<usize>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Oracle region of attraction volume on the shared samples.
    pub oracle_volume: VolumeEstimate,
    /// Fraction of samples the oracle could not classify (counted outside).
    pub undetermined_rate: f64,
    /// `D_V` never rises by more than twice the combined standard error.
    pub dv_nonincreasing: bool,
    /// Volume never drops by more than twice the combined standard error.
    pub volume_nondecreasing: bool,
    pub certificates: Vec<Option<Certificate>>,
}

fn monotone(values: &[VolumeEstimate], sign: f64) -> bool {
    values.windows(2).all(|w| {
        let slack = 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        sign * (w[1].value - w[0].value) <= slack
    })
}

pub fn validate_degrees(degrees: &[u32]) -> Result<(), PipelineError> {
    if degrees.is_empty() {
        return Err(PipelineError::Degrees("empty".into()));
    }
    if let Some(d) = degrees.iter().find(|d| *d % 2 == 1) {
        return Err(PipelineError::Degrees(format!("{d} is odd")));
    }
    if degrees.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PipelineError::Degrees("degrees must increase".into()));
    }
    Ok(())
}

/// One [`estimate_roa`] per degree, compared against the oracle region of
/// attraction on one shared sample set. Per-degree failures become rows.
pub fn degree_sweep(
    f: &VectorField,
    spec: &RoaSpec,
    degrees: &[u32],
    cfg: &OracleConfig,
) -> Result<SweepTable, PipelineError> {
    validate_degrees(degrees)?;
    spec.validate(f.nvars())?;
    let oracle = Oracle::new(f, cfg)?;
    let samples = Samples::new(&spec.domain, spec.volume_samples, spec.seed);
    let classes = oracle.classify_batch(&samples.points);
    let roa: Vec<bool> = classes
        .iter()
        .map(|c| matches!(c, Ok(Membership::Converged)))
        .collect();
    let undetermined = classes
        .iter()
        .filter(|c| !matches!(c, Ok(Membership::Converged | Membership::Diverged)))
        .count();

    let results: Vec<Result<Certificate, PipelineError>> = degrees
        .par_iter()
        .map(|&d| estimate_roa(f, &spec.with_degree(d), cfg))
        .collect();
    let mut rows = Vec::new();
    let mut certificates = Vec::new();
    for (&degree, result) in degrees.iter().zip(results) {
        match result {
            Ok(cert) => {
                let hits = samples.hits(&cert);
                rows.push(SweepRow {
                    degree,
                    status: Some(cert.status),
                    objective: Some(cert.objective),
                    volume: Some(samples.estimate(&hits)),
                    dv: Some(samples.estimate(&symmetric_difference(&hits, &roa))),
                    diverged: cert.verification.as_ref().map(|v| v.diverged),
                    error: None,
                });
                certificates.push(Some(cert));
            }
            Err(e) => {
                rows.push(SweepRow {
                    degree,
                    status: None,
                    objective: None,
                    volume: None,
                    dv: None,
                    diverged: None,
                    error: Some(e.to_string()),
                });
                certificates.push(None);
            }
        }
    }
    let dvs: Vec<VolumeEstimate> = rows.iter().filter_map(|r| r.dv).collect();
    let vols: Vec<VolumeEstimate> = rows.iter().filter_map(|r| r.volume).collect();
    Ok(SweepTable {
        oracle_volume: samples.estimate(&roa),
        undetermined_rate: undetermined as f64 / samples.len().max(1) as f64,
        dv_nonincreasing: monotone(&dvs, 1.0),
        volume_nondecreasing: monotone(&vols, -1.0),
        rows,
        certificates,
    })
}

#[derive(Serialize)]
struct SweepRecord<'a> {
    degree: u32,
    status: String,
    objective: Option<f64>,
    volume: Option<f64>,
    volume_se: Option<f64>,
    dv: Option<f64>,
    dv_se: Option<f64>,
    diverged: Option<usize>,
    error: Option<&'a str>,
}

impl SweepTable {
    /// One CSV line per degree; failed degrees have status `FAILED`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(SweepRecord {
                degree: r.degree,
                status: r.status.map_or("FAILED".into(), |s| format!("{s:?}")),
                objective: r.objective,
                volume: r.volume.map(|v| v.value),
                volume_se: r.volume.map(|v| v.std_error),
                dv: r.dv.map(|v| v.value),
                dv_se: r.dv.map(|v| v.std_error),
                diverged: r.diverged,
                error: r.error.as_deref(),
            })?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
