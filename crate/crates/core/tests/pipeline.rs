use roacert::dynamics::{OracleConfig, VectorField};
use roacert::pipeline::{
    apply_verification, degree_sweep, estimate_roa, verify_inner, CertificateStatus, PipelineError,
    RoaSpec,
};
use roacert::plot::crossings_1d;
use roacert::poly::{BoxDomain, Poly};

fn scalar_spec(d: u32) -> RoaSpec {
    RoaSpec::new(1.0, 1, 1.5, BoxDomain::symmetric(&[1.2]).unwrap(), d)
}

#[test]
fn scalar_certificate_lies_inside_the_true_basin() {
    let f = VectorField::scalar_cubic();
    let cert = estimate_roa(&f, &scalar_spec(8), &OracleConfig::default()).unwrap();
    assert_eq!(cert.status, CertificateStatus::Verified);
    let v = cert.verification.as_ref().unwrap();
    assert_eq!((v.points, v.diverged), (1000, 0));
    // {P_d < 1} is an interval around 0 whose end points sit inside (−1, 1).
    let xs = crossings_1d(&cert.p_d, -1.5, 1.5, 3001, 1.0);
    assert_eq!(xs.len(), 2, "{xs:?}");
    assert!(xs[0] > -1.0 && xs[1] < 1.0, "{xs:?}");
    assert!(cert.contains(&[0.5 * (xs[0] + xs[1])]));
    assert!(cert.checks.as_ref().unwrap().passed);
}

#[test]
fn corrupted_certificate_is_falsified() {
    let f = VectorField::scalar_cubic();
    let cfg = OracleConfig::default();
    let mut cert = estimate_roa(&f, &scalar_spec(6), &cfg).unwrap();
    cert.p_d = cert.p_d.add(&Poly::constant(1, -1.0)).unwrap();
    let report = verify_inner(&cert, &f, &cfg, 1000, 0).unwrap();
    assert!(report.diverged > 0 && report.falsified);
    assert!(report.counterexamples.iter().all(|x| x[0].abs() > 1.0));
    apply_verification(&mut cert, report);
    assert_eq!(cert.status, CertificateStatus::Falsified);
}

#[test]
fn empty_sublevel_set_is_vacuously_verified() {
    let cert = estimate_roa(
        &VectorField::scalar_cubic(),
        &scalar_spec(4),
        &OracleConfig::default(),
    )
    .unwrap();
    assert_eq!(cert.status, CertificateStatus::Empty);
    assert!(cert.status.is_verified());
    assert!(cert.verification.unwrap().empty);
}

#[test]
fn runs_are_bit_reproducible() {
    let f = VectorField::scalar_cubic();
    let a = estimate_roa(&f, &scalar_spec(6), &OracleConfig::default()).unwrap();
    let b = estimate_roa(&f, &scalar_spec(6), &OracleConfig::default()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(
        roacert::pipeline::Certificate::from_json(&a.to_json()).unwrap(),
        a
    );
}

#[test]
fn non_hurwitz_needs_override() {
    let f = VectorField::servomechanism(1.0, 1.0, 1.0, 1.0);
    let spec = RoaSpec::new(
        0.5,
        2,
        3f64.sqrt(),
        BoxDomain::symmetric(&[1.0; 3]).unwrap(),
        4,
    );
    let err = estimate_roa(&f, &spec, &OracleConfig::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Dynamics(_)), "{err}");
}

#[test]
fn sweep_rows_and_failures() {
    let f = VectorField::scalar_cubic();
    let cfg = OracleConfig::default();
    let one = degree_sweep(&f, &scalar_spec(4), &[6], &cfg).unwrap();
    assert_eq!(one.rows.len(), 1);
    assert!(
        degree_sweep(&f, &scalar_spec(4), &[6, 7], &cfg).is_err(),
        "odd degrees are rejected before any solve"
    );
    assert!(degree_sweep(&f, &scalar_spec(4), &[], &cfg).is_err());
    let table = degree_sweep(
        &f,
        &RoaSpec {
            tol: 1e-8,
            ..scalar_spec(4)
        },
        &[4, 6, 8, 10],
        &cfg,
    )
    .unwrap();
    assert_eq!(table.rows.len(), 4);
    assert!(table.dv_nonincreasing);
    assert!(table.rows.iter().all(|r| !r.failed()));
    let csv = table.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn unsolvable_degree_is_marked_failed() {
    // A degree below the minimum passes the list check but cannot compile.
    let f = VectorField::scalar_cubic();
    let table = degree_sweep(&f, &scalar_spec(4), &[0, 6], &OracleConfig::default());
    match table {
        Ok(t) => {
            assert!(t.rows[0].failed());
            assert!(!t.rows[1].failed());
            assert!(t.to_csv().unwrap().contains("FAILED"));
        }
        Err(e) => panic!("sweep aborted: {e}"),
    }
}
