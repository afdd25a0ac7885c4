use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use roacert::cli::{
    CliError, Degrees, Exit, OracleBlock, ProblemFile, SpecBlock, Term, PROBLEM_SCHEMA,
};
use roacert::pipeline::{Certificate, PipelineError};
use roacert::plot::LevelSet;
use roacert::poly::{BoxDomain, Poly};
use roacert::sdp::{solve, Row, SdpProblem, Var};

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(format!("{name}.json"))
}

fn roa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roa"))
        .args(args)
        .env_remove("ROACERT_OUT")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_variant(dir: &Path, name: &str, edit: impl FnOnce(&mut ProblemFile)) -> PathBuf {
    let mut p = ProblemFile::parse(&fs::read_to_string(problem("scalar")).unwrap()).unwrap();
    edit(&mut p);
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, p.to_json()).unwrap();
    path
}

#[test]
fn solve_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = roa(&["solve", "--problem", s(&problem("scalar")), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ca, cb) = (
        fs::read(a.join("scalar-d10.cert.json")).unwrap(),
        fs::read(b.join("scalar-d10.cert.json")).unwrap(),
    );
    assert_eq!(ca, cb);
    let cert = Certificate::from_json(std::str::from_utf8(&ca).unwrap()).unwrap();
    assert!(cert.status.is_verified());
    assert_eq!(cert.spec.degree, 10);
    assert!(cert.problem_file_sha256.is_some());
}

#[test]
fn box_outside_ball_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_variant(dir.path(), "bad", |p| p.spec.radius = 1.0);
    let o = roa(&["solve", "--problem", s(&bad), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not inside the ball"));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(
        &path,
        "{\n  \"schema\": \"roacert-problem/1\",\n  \"nvars\": 1,,\n}",
    )
    .unwrap();
    let o = roa(&["solve", "--problem", s(&path), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 3, column"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn corrupted_margin_is_falsified() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_variant(dir.path(), "corrupt", |p| {
        p.spec.degree = Degrees::One(6);
        p.spec.margin = -1.0;
    });
    let o = roa(&["solve", "--problem", s(&bad), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(
        dir.path().join("scalar-d6.cert.json").exists(),
        "certificate is written regardless"
    );
}

#[test]
fn solver_failures_map_to_exit_three() {
    let p = SdpProblem {
        psd_blocks: vec![1],
        rows: vec![Row {
            entries: vec![(Var::psd(0, 0, 0), 1.0)],
            rhs: -1.0,
        }],
        labels: vec!["x".into()],
        ..Default::default()
    };
    let solution = solve(&p, 1e-8).unwrap();
    let e = CliError::from(PipelineError::Solver {
        degree: 4,
        status: solution.status,
        problem: Box::new(p),
        solution: Box::new(solution),
    });
    assert_eq!(e.exit(), Exit::SolverFailure);
    assert_eq!(Exit::SolverFailure.code(), 3);
}

#[test]
fn sweep_writes_one_row_per_degree() {
    let dir = tempfile::tempdir().unwrap();
    let o = roa(&[
        "sweep",
        "--problem",
        s(&problem("scalar")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("scalar-sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    let dvs: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert!(dvs.windows(2).all(|w| w[1] <= w[0] + 0.01), "{dvs:?}");
}

#[test]
fn sweep_usage_and_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_variant(dir.path(), "empty", |p| {
        p.spec.degree = Degrees::Many(vec![])
    });
    let o = roa(&["sweep", "--problem", s(&empty), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("usage"));

    let o = roa(&[
        "sweep",
        "--problem",
        s(&problem("scalar")),
        "--degrees",
        "0,6",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 3);
    let table = fs::read_to_string(dir.path().join("scalar-sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert!(rows[0].starts_with("0,FAILED"), "{table}");
    assert!(rows[1].starts_with("6,Verified"), "{table}");
}

#[test]
fn oracle_table_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.csv");
    fs::write(
        &points,
        "# scalar grid\n0\n0.3\n-0.6\n0.9\n1.5\n0.1,0.2\nnan\n",
    )
    .unwrap();
    let o = roa(&[
        "oracle",
        "--problem",
        s(&problem("scalar")),
        "--points",
        s(&points),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1, "malformed rows make the run invalid");
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(
        stderr.contains("row 6") && stderr.contains("row 7"),
        "{stderr}"
    );

    let text = fs::read_to_string(dir.path().join("scalar-oracle.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 7);
    for r in &rows[..4] {
        let x: f64 = r[0].parse().unwrap();
        let w: f64 = r[2].parse().unwrap();
        assert_eq!(&r[1], "Converged");
        assert!(
            (w - (1.0 - (1.0 - x * x).sqrt())).abs() < 1e-5,
            "x = {x}: {w}"
        );
    }
    assert_eq!((&rows[0][2], &rows[0][5], &rows[0][8]), ("0", "0", "0"));
    assert_eq!(
        (&rows[4][1], &rows[4][2], &rows[4][8]),
        ("Diverged", "1", "inf")
    );
    assert_eq!(&rows[5][1], "Rejected");
    assert!(rows[6][9].starts_with("row 7"));
}

#[test]
fn plot_reports_scalar_crossings() {
    let dir = tempfile::tempdir().unwrap();
    let o = roa(&[
        "solve",
        "--problem",
        s(&problem("scalar")),
        "--degree",
        "8",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let cert = dir.path().join("scalar-d8.cert.json");
    let o = roa(&[
        "plot",
        "--certificate",
        s(&cert),
        "--problem",
        s(&problem("scalar")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ls: LevelSet = serde_json::from_str(
        &fs::read_to_string(dir.path().join("scalar-d8-levelset.json")).unwrap(),
    )
    .unwrap();
    let LevelSet::Crossings(xs) = ls else {
        panic!("expected crossings")
    };
    assert_eq!(xs.len(), 2);
    assert!(
        xs[0] < -0.9 && xs[0] > -1.0 && xs[1] > 0.9 && xs[1] < 1.0,
        "{xs:?}"
    );
    let svg = fs::read_to_string(dir.path().join("scalar-d8.svg")).unwrap();
    let hash = roacert::cli::content_hash(&fs::read(problem("scalar")).unwrap());
    assert!(svg.contains(&format!("problem_sha256={hash}")));
    assert!(svg.contains("seed=0 tol=1e-8"));
}

/// Certificate document for `p_d` over `domain`, built from a real scalar run.
fn fake_certificate(dir: &Path, name: &str, p_d: Poly, domain: BoxDomain, radius: f64) -> PathBuf {
    let mut cert = roacert::pipeline::certify(
        &roacert::dynamics::VectorField::scalar_cubic(),
        &roacert::pipeline::RoaSpec::new(1.0, 1, 1.5, BoxDomain::symmetric(&[1.2]).unwrap(), 4),
    )
    .unwrap();
    cert.p_d = p_d;
    cert.spec.domain = domain;
    cert.spec.radius = radius;
    let path = dir.join(format!("{name}.cert.json"));
    fs::write(&path, cert.to_json()).unwrap();
    path
}

#[test]
fn constant_certificate_has_no_contour() {
    let dir = tempfile::tempdir().unwrap();
    let cert = fake_certificate(
        dir.path(),
        "two",
        Poly::constant(2, 2.0),
        BoxDomain::symmetric(&[1.0, 1.0]).unwrap(),
        2.0,
    );
    let o = roa(&[
        "plot",
        "--certificate",
        s(&cert),
        "--grid",
        "50",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let ls: LevelSet =
        serde_json::from_str(&fs::read_to_string(dir.path().join("two-levelset.json")).unwrap())
            .unwrap();
    assert_eq!(ls, LevelSet::Contours(vec![]));
}

#[test]
fn four_variables_are_unsupported_but_gridded() {
    let dir = tempfile::tempdir().unwrap();
    let p = roacert::poly::norm_squared(4);
    let cert = fake_certificate(
        dir.path(),
        "four",
        p,
        BoxDomain::symmetric(&[1.0; 4]).unwrap(),
        2.0,
    );
    let o = roa(&[
        "plot",
        "--certificate",
        s(&cert),
        "--grid",
        "6",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
    let grid = fs::read_to_string(dir.path().join("four-grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 6usize.pow(4));
    assert!(!dir.path().join("four.svg").exists());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_roa"))
        .args(["solve", "--problem", s(&problem("scalar")), "--degree", "6"])
        .env("ROACERT_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("scalar-d6.cert.json").exists());
}

#[test]
fn help_documents_every_flag() {
    let o = roa(&["solve", "--help"]);
    assert_eq!(code(&o), 0);
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--problem",
        "--out",
        "--degree",
        "--seed",
        "--samples",
        "--tol",
        "--grid",
        "ROACERT_OUT",
    ] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
    assert_eq!(code(&roa(&["solve"])), 1);
}

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::ZERO
}

fn problem_file() -> impl Strategy<Value = ProblemFile> {
    (1usize..=3).prop_flat_map(|n| {
        let term =
            (prop::collection::vec(0u32..6, n), finite()).prop_map(|(exponents, coefficient)| {
                Term {
                    exponents,
                    coefficient,
                }
            });
        let degrees = prop_oneof![
            any::<u32>().prop_map(Degrees::One),
            prop::collection::vec(any::<u32>(), 0..5).prop_map(Degrees::Many)
        ];
        let spec = (
            finite(),
            any::<u32>(),
            finite(),
            prop::collection::vec(finite(), n),
            prop::collection::vec(finite(), n),
            degrees,
            finite(),
            finite(),
        )
            .prop_map(
                |(lambda, beta, radius, lo, hi, degree, tol, margin)| SpecBlock {
                    lambda,
                    beta,
                    radius,
                    domain: BoxDomain { lo, hi },
                    degree,
                    tol,
                    margin,
                },
            );
        let oracle = (
            finite(),
            finite(),
            finite(),
            finite(),
            finite(),
            finite(),
            any::<bool>(),
            any::<u64>(),
            any::<usize>(),
            any::<usize>(),
        )
            .prop_map(
                |(
                    eta,
                    t_max,
                    escape_radius,
                    rel_tol,
                    abs_tol,
                    tail_tol,
                    allow_non_hurwitz,
                    seed,
                    samples,
                    volume_samples,
                )| OracleBlock {
                    eta,
                    t_max,
                    escape_radius,
                    rel_tol,
                    abs_tol,
                    tail_tol,
                    allow_non_hurwitz,
                    seed,
                    samples,
                    volume_samples,
                },
            );
        (
            "[a-z0-9 _-]{0,12}",
            prop::collection::vec(prop::collection::vec(term, 0..4), n),
            spec,
            oracle,
        )
            .prop_map(move |(name, field, spec, oracle)| ProblemFile {
                schema: PROBLEM_SCHEMA.into(),
                name,
                nvars: n,
                field,
                spec,
                oracle,
            })
    })
}

proptest! {
    #[test]
    fn problem_files_round_trip(p in problem_file()) {
        prop_assert_eq!(ProblemFile::parse(&p.to_json()).unwrap(), p);
    }
}

#[test]
fn bundled_problems_are_valid() {
    for name in ["scalar", "vanderpol", "servo3"] {
        let p = ProblemFile::parse(&fs::read_to_string(problem(name)).unwrap()).unwrap();
        p.vector_field().unwrap();
        p.oracle_config().unwrap();
        for d in p.spec.degree.list() {
            p.roa_spec(d).unwrap();
        }
    }
}
