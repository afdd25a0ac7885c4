//! End-to-end acceptance checks. Each test prints one `PASS` or `FAIL` line
//! with the measured quantities, then asserts the same condition.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use roacert::dynamics::{v_oracle, w_oracle, Oracle, OracleConfig, VectorField};
use roacert::metrics::{
    sublevel_convergence_check, symmetric_difference, volume_mc, IndicatorSet, Predicate, Samples,
    ScalarField,
};
use roacert::pipeline::{
    check_constraints, degree_sweep, estimate_roa, verify_grid, Certificate, CheckPlan, OracleRoa,
    RoaSpec, DOMINANCE_TOL,
};
use roacert::poly::{box_moments, BoxDomain, Monomial};
use roacert::sdp::{solve, Row, SdpProblem, SolveStatus, Var};

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn within(start: Instant, limit: Duration) -> bool {
    start.elapsed() <= limit
}

#[test]
fn criterion_1_closed_form_oracles() {
    let start = Instant::now();
    let f = VectorField::scalar_cubic();
    let cfg = OracleConfig::default();
    let (lambda, beta) = (1.0, 1);
    let mut worst: f64 = 0.0;
    for x0 in [0.0, 0.3, -0.3, 0.6, -0.6, 0.9, -0.9f64] {
        let v = v_oracle(&f, &[x0], beta, &cfg).unwrap().value;
        let w = w_oracle(&f, &[x0], lambda, beta, &cfg).unwrap().value;
        let v_exact = -0.5 * (1.0 - x0 * x0).ln();
        let w_exact = 1.0 - (1.0 - x0 * x0).powf(lambda / 2.0);
        worst = worst.max((v - v_exact).abs()).max((w - w_exact).abs());
    }
    let pass = worst <= 1e-5 && within(start, Duration::from_secs(5));
    report(
        1,
        pass,
        &format!(
            "max abs error {worst:.2e} (limit 1e-5), {:.2} s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_scalar_benchmark() {
    let start = Instant::now();
    let f = VectorField::scalar_cubic();
    let spec = RoaSpec::new(1.0, 1, 1.5, BoxDomain::symmetric(&[1.2]).unwrap(), 4);
    let cfg = OracleConfig::default();
    let table = degree_sweep(&f, &spec, &[4, 6, 8, 10], &cfg).unwrap();
    let samples = Samples::new(&spec.domain, 20_000, 0);
    let truth = Predicate::new("(-1, 1)", |x: &[f64]| x[0].abs() < 1.0);
    let mut verified = true;
    let mut dvs = Vec::new();
    for cert in &table.certificates {
        let cert = cert.as_ref().expect("every degree solves");
        let v = cert.verification.as_ref().unwrap();
        verified &= cert.status.is_verified() && v.points == 1000 && v.diverged == 0;
        let inner = Predicate::new("P_d < 1", |x: &[f64]| cert.contains(x));
        dvs.push(samples.dv(&inner, &truth));
    }
    let trend = dvs.windows(2).all(|w| {
        w[1].value - w[0].value <= 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt()
    });
    let last = dvs.last().unwrap().value;
    let pass = verified && trend && last <= 0.2 && within(start, Duration::from_secs(60));
    let shown: Vec<String> = dvs.iter().map(|e| format!("{:.4}", e.value)).collect();
    report(
        2,
        pass,
        &format!(
            "verified {verified}, D_V d=4..10 [{}], non-increasing {trend}, {:.1} s",
            shown.join(", "),
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_van_der_pol() {
    let start = Instant::now();
    let f = VectorField::van_der_pol();
    let spec = RoaSpec::new(
        0.05,
        2,
        11.29f64.sqrt(),
        BoxDomain::symmetric(&[2.0, 2.7]).unwrap(),
        12,
    );
    let cfg = OracleConfig::default();
    let table = degree_sweep(&f, &spec, &[6, 8, 10, 12], &cfg).unwrap();
    let cert = table.certificates[3].as_ref().expect("d=12 is feasible");
    let grid = verify_grid(cert, &f, &cfg, &[100, 135]).unwrap();
    let areas: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{:.3}", r.volume.map_or(f64::NAN, |v| v.value)))
        .collect();
    let pass = cert.status.is_verified()
        && !grid.empty
        && grid.diverged == 0
        && table.volume_nondecreasing
        && within(start, Duration::from_secs(15 * 60));
    report(
        3,
        pass,
        &format!(
            "d=12 {:?}, grid 100x135 in-set {} diverged {}, areas d=6..12 [{}], non-decreasing {}, {:.1} s",
            cert.status,
            grid.in_set,
            grid.diverged,
            areas.join(", "),
            table.volume_nondecreasing,
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_servomechanism() {
    let start = Instant::now();
    let f = VectorField::servomechanism(1.0, 1.0, 1.0, 1.0);
    let domain = BoxDomain::symmetric(&[1.0; 3]).unwrap();
    let cfg = OracleConfig {
        allow_non_hurwitz: true,
        ..OracleConfig::default()
    };
    let oracle = Oracle::new(&f, &cfg).unwrap();
    let roa = volume_mc(&OracleRoa { oracle: &oracle }, &domain, 20_000, 0);
    let spec = RoaSpec::new(0.5, 2, 3f64.sqrt(), domain.clone(), 10);
    let cert = estimate_roa(&f, &spec, &cfg).unwrap();
    let vol = cert.volume.unwrap();
    let diverged = cert.verification.as_ref().unwrap().diverged;
    let oracle_ok = (roa.value - 0.3372).abs() <= 0.02;
    let hard = diverged == 0 && cert.status.is_verified();
    let soft_gap = vol.value - 0.2806;
    let pass = oracle_ok && hard && within(start, Duration::from_secs(60 * 60));
    report(
        4,
        pass,
        &format!(
            "oracle volume {:.4} ± {:.4} (fraction of Λ {:.4}; target 0.3372 ± 0.02), certificate {:?} volume {:.4} (fraction {:.4}; soft target 0.2806, gap {soft_gap:+.4}), diverged {diverged}, {:.1} s",
            roa.value,
            roa.std_error,
            roa.fraction,
            cert.status,
            vol.value,
            vol.fraction,
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

fn psd_row(entries: Vec<(Var, f64)>, rhs: f64) -> Row {
    Row { entries, rhs }
}

/// `Σ yᵢ Aᵢ` on PSD block `b`, splitting off-diagonal coefficients over the pair.
fn adjoint_block(p: &SdpProblem, y: &[f64], b: usize) -> DMatrix<f64> {
    let n = p.psd_blocks[b];
    let mut m = DMatrix::zeros(n, n);
    for (r, yi) in p.rows.iter().zip(y) {
        for &(v, c) in &r.entries {
            if let Var::Psd { block, row, col } = v {
                if block == b {
                    let w = if row == col { c } else { c / 2.0 };
                    m[(row, col)] += yi * w;
                    if row != col {
                        m[(col, row)] += yi * w;
                    }
                }
            }
        }
    }
    m
}

#[test]
fn criterion_5_sdp_contract() {
    let start = Instant::now();
    let x = |a, b| Var::psd(0, a, b);
    let one = SdpProblem {
        psd_blocks: vec![1],
        rows: vec![psd_row(vec![(x(0, 0), 1.0)], 1.0)],
        objective: vec![(x(0, 0), 1.0)],
        labels: vec!["x11".into()],
        ..Default::default()
    };
    let kkt = SdpProblem {
        psd_blocks: vec![2],
        rows: vec![
            psd_row(vec![(x(0, 1), 1.0)], 1.0),
            psd_row(vec![(x(0, 0), 1.0), (x(1, 1), 1.0)], 2.0),
        ],
        objective: vec![(x(0, 0), 1.0)],
        labels: vec!["x12".into(), "trace".into()],
        ..Default::default()
    };
    let infeasible = SdpProblem {
        psd_blocks: vec![1],
        rows: vec![psd_row(vec![(x(0, 0), 1.0)], -1.0)],
        objective: vec![(x(0, 0), 1.0)],
        labels: vec!["x11".into()],
        ..Default::default()
    };
    let a = solve(&one, 1e-8).unwrap();
    let b = solve(&kkt, 1e-8).unwrap();
    let c = solve(&infeasible, 1e-8).unwrap();
    let optimal = |s: &roacert::sdp::SdpSolution, value: f64| {
        s.status == SolveStatus::Optimal
            && s.gap <= 1e-8
            && (s.primal_objective - value).abs() <= 1e-7
    };
    let ray_ok = c.status == SolveStatus::Infeasible
        && c.dual_ray.as_ref().is_some_and(|y| {
            let by: f64 = infeasible.rows.iter().zip(y).map(|(r, v)| r.rhs * v).sum();
            (by - 1.0).abs() < 1e-9
                && (-adjoint_block(&infeasible, y, 0))
                    .symmetric_eigenvalues()
                    .min()
                    >= -1e-9
        });
    let pass =
        optimal(&a, 1.0) && optimal(&b, 1.0) && ray_ok && within(start, Duration::from_secs(1));
    report(
        5,
        pass,
        &format!(
            "1x1 gap {:.1e}, KKT optimum {:.9} gap {:.1e}, infeasible {:?} with ray {}, {:.3} s",
            a.gap,
            b.primal_objective,
            b.gap,
            c.status,
            ray_ok,
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

/// `∫_Λ g` by nested adaptive Clenshaw–Curtis quadrature, one axis at a time.
fn nested_quadrature(g: &dyn Fn(&[f64]) -> f64, domain: &BoxDomain, prefix: &[f64]) -> f64 {
    let axis = prefix.len();
    if axis == domain.dim() {
        return g(prefix);
    }
    let inner = |t: f64| nested_quadrature(g, domain, &[prefix, &[t]].concat());
    // Splitting at 0 keeps `|x^e|` polynomial on each piece.
    let (lo, hi) = (domain.lo[axis], domain.hi[axis]);
    let cuts: Vec<f64> = if lo < 0.0 && hi > 0.0 {
        vec![lo, 0.0, hi]
    } else {
        vec![lo, hi]
    };
    cuts.windows(2)
        .map(|w| quadrature::clenshaw_curtis::integrate(inner, w[0], w[1], 1e-11).integral)
        .sum()
}

#[test]
fn criterion_6_moment_exactness() {
    let start = Instant::now();
    let boxes = [
        BoxDomain::symmetric(&[1.2]).unwrap(),
        BoxDomain::symmetric(&[2.0, 2.7]).unwrap(),
        BoxDomain::symmetric(&[1.0; 3]).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for domain in &boxes {
        let mv = box_moments(8, domain).unwrap();
        for (m, exact) in mv.basis.iter().zip(&mv.entries) {
            let m: &Monomial = m;
            let q = nested_quadrature(&|x| m.eval(x), domain, &[]);
            // Odd moments vanish, so errors are measured against ∫|x^e|.
            let scale = nested_quadrature(&|x| m.eval(x).abs(), domain, &[]);
            worst = worst.max((q - exact).abs() / scale);
            count += 1;
        }
    }
    let pass = worst <= 1e-10 && within(start, Duration::from_secs(10));
    report(
        6,
        pass,
        &format!(
            "{count} monomials, max relative error {worst:.2e} (limit 1e-10), {:.2} s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

struct Disk {
    c: [f64; 2],
    r: f64,
}

impl IndicatorSet for Disk {
    fn contains(&self, x: &[f64]) -> bool {
        (x[0] - self.c[0]).powi(2) + (x[1] - self.c[1]).powi(2) < self.r * self.r
    }
}

/// `‖x‖² + c`.
struct Shifted(f64);

impl ScalarField for Shifted {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() + self.0
    }
}

#[test]
fn criterion_7_set_metric_suite() {
    let start = Instant::now();
    let domain = BoxDomain::symmetric(&[1.5, 1.5]).unwrap();
    let samples = Samples::new(&domain, 50_000, 0);
    let count = |h: &[bool]| h.iter().filter(|b| **b).count();
    let disks = [
        Disk {
            c: [0.0, 0.0],
            r: 1.0,
        },
        Disk {
            c: [0.4, -0.2],
            r: 0.7,
        },
        Disk {
            c: [-0.5, 0.5],
            r: 0.9,
        },
        Disk {
            c: [0.1, 0.0],
            r: 0.3,
        },
    ];
    let hits: Vec<Vec<bool>> = disks.iter().map(|d| samples.hits(d)).collect();
    let d = |a: usize, b: usize| count(&symmetric_difference(&hits[a], &hits[b]));
    let mut axioms = true;
    for a in 0..4 {
        axioms &= d(a, a) == 0;
        for b in 0..4 {
            axioms &= d(a, b) == d(b, a);
            for c in 0..4 {
                axioms &= d(a, c) <= d(a, b) + d(b, c);
            }
        }
    }
    // Disk 3 sits inside disk 0.
    let nested = hits[3].iter().zip(&hits[0]).all(|(s, b)| !s || *b)
        && d(0, 3) == count(&hits[0]) - count(&hits[3]);

    let v = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
    let degrees = [1u32, 2, 4, 8, 16, 32];
    let shifted: Vec<Shifted> = degrees.iter().map(|&k| Shifted(1.0 / k as f64)).collect();
    let family: Vec<(u32, &dyn ScalarField)> = degrees
        .iter()
        .zip(&shifted)
        .map(|(&k, j)| (k, j as &dyn ScalarField))
        .collect();
    let rows = sublevel_convergence_check(&v, &family, 1.0, &domain, 200_000, 0).unwrap();
    let mut annulus = true;
    for row in &rows {
        // {1 − 1/d ≤ ‖x‖² < 1} has area π/d.
        let exact = std::f64::consts::PI / row.degree as f64;
        annulus &= (row.dv.value - exact).abs() <= 3.0 * row.dv.std_error;
    }
    let decreasing = rows.windows(2).all(|w| w[1].dv.value < w[0].dv.value);
    let pass = axioms && nested && annulus && decreasing && within(start, Duration::from_secs(30));
    let shown: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.4}±{:.4}", r.dv.value, r.dv.std_error))
        .collect();
    report(
        7,
        pass,
        &format!(
            "axioms {axioms}, nested identity {nested}, annulus D_V [{}] vs π/d {annulus}, decreasing {decreasing}, {:.2} s",
            shown.join(", "),
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

fn field_for(cert: &Certificate) -> (VectorField, OracleConfig) {
    match cert.nvars() {
        1 => (VectorField::scalar_cubic(), OracleConfig::default()),
        2 => (VectorField::van_der_pol(), OracleConfig::default()),
        3 => (
            VectorField::servomechanism(1.0, 1.0, 1.0, 1.0),
            OracleConfig {
                allow_non_hurwitz: true,
                ..OracleConfig::default()
            },
        ),
        n => panic!("no shipped system with {n} variables"),
    }
}

#[test]
fn criterion_8_shipped_certificates() {
    let start = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("certificates");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".cert.json"))
        .collect();
    paths.sort();
    let mut failures = Vec::new();
    for path in &paths {
        let cert = Certificate::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
        let (f, cfg) = field_for(&cert);
        let checks = check_constraints(&cert, &f, &cfg, CheckPlan::default()).unwrap();
        if !(checks.passed
            && checks.dominance_violation <= DOMINANCE_TOL
            && cert.status.is_verified())
        {
            failures.push(format!("{} ({checks:?})", path.display()));
        }
    }
    let pass = !paths.is_empty() && failures.is_empty();
    report(
        8,
        pass,
        &format!(
            "{} certificates checked, failures {failures:?}, {:.1} s",
            paths.len(),
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}
