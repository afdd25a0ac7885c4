use serde::{Deserialize, Serialize};

use super::{Certificate, CertificateStatus};
use crate::dynamics::{DynamicsError, Membership, Oracle, OracleConfig, VectorField};
use crate::metrics::{IndicatorSet, Samples};

/// Points with `|P_d − 1|` below this are counted as grazing the boundary.
pub const GRAZING_TOL: f64 = 1e-9;

/// Counterexamples kept in a report.
const MAX_COUNTEREXAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SampleDesign {
    Uniform { n: usize, seed: u64 },
    Grid { points_per_axis: Vec<usize> },
}

/// Trajectory check of the inner set on a point design over `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub design: SampleDesign,
    pub points: usize,
    /// Points with `‖x‖ < R` and `P_d(x) < 1`.
    pub in_set: usize,
    pub converged: usize,
    pub diverged: usize,
    pub undetermined: usize,
    /// In-set points with `|P_d − 1| < GRAZING_TOL`.
    pub grazing: usize,
    /// Oracle failures (step underflow), counted apart from the classes.
    pub oracle_errors: usize,
    pub counterexamples: Vec<Vec<f64>>,
    pub empty: bool,
    pub falsified: bool,
}

impl VerificationReport {
    pub fn status(&self) -> CertificateStatus {
        if self.falsified {
            CertificateStatus::Falsified
        } else if self.empty {
            CertificateStatus::Empty
        } else {
            CertificateStatus::Verified
        }
    }
}

/// Region-of-attraction indicator from trajectory simulation. Undetermined
/// and failed runs count as outside.
pub struct OracleRoa<'a> {
    pub oracle: &'a Oracle,
}

impl IndicatorSet for OracleRoa<'_> {
    fn contains(&self, x: &[f64]) -> bool {
        matches!(self.oracle.classify(x), Ok(Membership::Converged))
    }

    fn label(&self) -> String {
        "oracle ROA".into()
    }
}

/// Certificate inner set as an indicator.
impl IndicatorSet for Certificate {
    fn contains(&self, x: &[f64]) -> bool {
        Certificate::contains(self, x)
    }

    fn label(&self) -> String {
        format!("P_{} < 1", self.spec.degree)
    }
}

fn check_points(
    cert: &Certificate,
    oracle: &Oracle,
    points: &[Vec<f64>],
    design: SampleDesign,
) -> VerificationReport {
    let inside: Vec<&Vec<f64>> = points.iter().filter(|x| cert.contains(x)).collect();
    let owned: Vec<Vec<f64>> = inside.iter().map(|x| x.to_vec()).collect();
    let classes = oracle.classify_batch(&owned);
    let mut report = VerificationReport {
        design,
        points: points.len(),
        in_set: inside.len(),
        converged: 0,
        diverged: 0,
        undetermined: 0,
        grazing: 0,
        oracle_errors: 0,
        counterexamples: Vec::new(),
        empty: inside.is_empty(),
        falsified: false,
    };
    for (x, class) in owned.iter().zip(classes) {
        if (cert.eval(x) - 1.0).abs() < GRAZING_TOL {
            report.grazing += 1;
        }
        match class {
            Ok(Membership::Converged) => report.converged += 1,
            Ok(Membership::Undetermined) => report.undetermined += 1,
            Ok(Membership::Diverged) => {
                report.diverged += 1;
                if report.counterexamples.len() < MAX_COUNTEREXAMPLES {
                    report.counterexamples.push(x.clone());
                }
            }
            Err(_) => report.oracle_errors += 1,
        }
    }
    report.falsified = report.diverged > 0;
    report
}

/// Simulates from every uniform sample of `Λ` that lies in the inner set.
pub fn verify_inner(
    cert: &Certificate,
    f: &VectorField,
    cfg: &OracleConfig,
    n: usize,
    seed: u64,
) -> Result<VerificationReport, DynamicsError> {
    let oracle = Oracle::new(f, cfg)?;
    let samples = Samples::new(&cert.spec.domain, n, seed);
    Ok(check_points(
        cert,
        &oracle,
        &samples.points,
        SampleDesign::Uniform { n, seed },
    ))
}

/// Tensor grid over `Λ` including its faces.
pub fn grid_points(domain: &crate::poly::BoxDomain, points_per_axis: &[usize]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for (a, &k) in points_per_axis.iter().enumerate() {
        let (lo, hi) = (domain.lo[a], domain.hi[a]);
        let axis: Vec<f64> = (0..k)
            .map(|i| {
                if k == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (k - 1) as f64
                }
            })
            .collect();
        out = out
            .into_iter()
            .flat_map(|p| axis.iter().map(move |&v| [p.as_slice(), &[v]].concat()))
            .collect();
    }
    out
}

/// Grid variant of [`verify_inner`].
pub fn verify_grid(
    cert: &Certificate,
    f: &VectorField,
    cfg: &OracleConfig,
    points_per_axis: &[usize],
) -> Result<VerificationReport, DynamicsError> {
    let oracle = Oracle::new(f, cfg)?;
    let points = grid_points(&cert.spec.domain, points_per_axis);
    Ok(check_points(
        cert,
        &oracle,
        &points,
        SampleDesign::Grid {
            points_per_axis: points_per_axis.to_vec(),
        },
    ))
}

/// Stores the report and moves the status accordingly. A certificate whose
/// identities failed stays `Unverified` unless the trajectories falsify it.
pub fn apply_verification(cert: &mut Certificate, report: VerificationReport) {
    let status = report.status();
    cert.status = match (cert.status, status) {
        (_, CertificateStatus::Falsified) => CertificateStatus::Falsified,
        (CertificateStatus::Unverified, _) => CertificateStatus::Unverified,
        (_, s) => s,
    };
    cert.verification = Some(report);
}

/// Like [`apply_verification`] for the grid report. A grid hit upgrades an
/// `Empty` uniform result to `Verified`.
pub fn apply_grid_verification(cert: &mut Certificate, report: VerificationReport) {
    cert.status = match (cert.status, report.status()) {
        (_, CertificateStatus::Falsified) => CertificateStatus::Falsified,
        (s @ (CertificateStatus::Falsified | CertificateStatus::Unverified), _) => s,
        (CertificateStatus::Empty, CertificateStatus::Verified) => CertificateStatus::Verified,
        (s, _) => s,
    };
    cert.grid_verification = Some(report);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::BoxDomain;

    #[test]
    fn grid_includes_faces() {
        let d = BoxDomain::symmetric(&[1.0, 2.0]).unwrap();
        let g = grid_points(&d, &[3, 2]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![-1.0, -2.0]);
        assert_eq!(g[5], vec![1.0, 2.0]);
    }
}
