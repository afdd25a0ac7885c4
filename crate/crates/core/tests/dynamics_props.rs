use roacert::dynamics::{
    estimate_theta, flow, integrate, local_stability, max_difference_quotient, Membership, Oracle,
    OracleConfig, Terminal, TheoryReport, VectorField,
};
use roacert::metrics::unit_sample;
use roacert::poly::{BoxDomain, Poly};

fn samples(domain: &BoxDomain, n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n as u64)
        .map(|i| domain.from_unit(&unit_sample(seed, i, domain.dim())))
        .collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Converged exactly when `W < 1 − 1e-6`, over 500 points per system.
#[test]
fn membership_matches_w_below_one() {
    let cases = [
        (
            VectorField::scalar_cubic(),
            BoxDomain::symmetric(&[1.2]).unwrap(),
            1.0,
            1,
        ),
        (
            VectorField::van_der_pol(),
            BoxDomain::symmetric(&[2.0, 2.7]).unwrap(),
            0.05,
            2,
        ),
    ];
    for (f, domain, lambda, beta) in cases {
        let oracle = Oracle::new(&f, &OracleConfig::default()).unwrap();
        let rows = oracle.evaluate_batch(&samples(&domain, 500, 3), lambda, beta);
        let mut undetermined = 0;
        for row in rows {
            let row = row.unwrap();
            match row.membership {
                Membership::Undetermined => undetermined += 1,
                m => assert_eq!(
                    m == Membership::Converged,
                    row.w.value < 1.0 - 1e-6,
                    "{row:?}"
                ),
            }
        }
        assert!(undetermined < 5, "{undetermined} undetermined");
    }
}

/// `d/dt W(φ(x,t)) = −λ‖x‖^{2β}(1 − W)` along converged trajectories.
#[test]
fn w_satisfies_its_transport_equation() {
    let f = VectorField::van_der_pol();
    let (lambda, beta) = (0.5, 2);
    let cfg = OracleConfig::default();
    let oracle = Oracle::new(&f, &cfg).unwrap();
    let h = 1e-3;
    let mut checked = 0;
    for x in samples(&BoxDomain::symmetric(&[1.5, 1.5]).unwrap(), 60, 5) {
        if norm(&x) < 0.4 {
            continue;
        }
        let row = oracle.evaluate(&x, lambda, beta).unwrap();
        if row.membership != Membership::Converged {
            continue;
        }
        let fwd = flow(&f, &x, h, &cfg).unwrap();
        let bwd = flow(&f.reversed(), &x, h, &cfg).unwrap();
        let dw = (oracle.w(&fwd, lambda, beta).unwrap().value
            - oracle.w(&bwd, lambda, beta).unwrap().value)
            / (2.0 * h);
        let expected = -lambda * norm(&x).powi(2 * beta as i32) * (1.0 - row.w.value);
        assert!(
            (dw - expected).abs() <= 1e-3 * expected.abs(),
            "x = {x:?}: {dw} vs {expected}"
        );
        checked += 1;
    }
    assert!(checked > 20);
}

/// Sampled difference quotients of `W` stay below the computed constant `K`.
#[test]
fn w_difference_quotients_respect_k() {
    let f = VectorField::new(vec![Poly::var(1, 0).scale(-1.0)]).unwrap();
    let (lambda, beta, radius) = (1.0, 2, 1.0);
    let cfg = OracleConfig::default();
    let stability = local_stability(&f, cfg.escape_radius);
    let report = TheoryReport::estimate(&f, &stability, cfg.eta, lambda, beta, radius, 500, 0);
    assert!(!report.rigorous);
    let k = report.lipschitz.expect("K is defined for this system");
    let oracle = Oracle::new(&f, &cfg).unwrap();
    let pts = samples(&BoxDomain::symmetric(&[radius]).unwrap(), 200, 9);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = pts
        .chunks(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    let q = max_difference_quotient(|x| oracle.w(x, lambda, beta).unwrap().value, &pairs);
    assert!(q <= k, "quotient {q} exceeds K = {k}");
}

/// `‖φ(x,t) − φ(y,t)‖ ≤ e^{θt}‖x − y‖` for `t ≤ 2` on pairs whose orbits stay
/// in `B_R`.
#[test]
fn trajectories_separate_at_most_exponentially() {
    let f = VectorField::van_der_pol();
    let radius = 11.29f64.sqrt();
    let theta = estimate_theta(&f, radius, 2000, 1);
    let cfg = OracleConfig {
        eta: 1e-9,
        ..OracleConfig::default()
    };
    let pts = samples(&BoxDomain::symmetric(&[0.7, 0.7]).unwrap(), 80, 2);
    for pair in pts.chunks(2) {
        let (x, y) = (&pair[0], &pair[1]);
        for t in [0.5, 1.0, 2.0] {
            let (px, py) = (flow(&f, x, t, &cfg).unwrap(), flow(&f, y, t, &cfg).unwrap());
            assert!(norm(&px) < radius && norm(&py) < radius);
            let d: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a - b).collect();
            let d0: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            assert!(norm(&d) <= (theta * t).exp() * norm(&d0));
        }
    }
}

/// Halving the integrator tolerance moves `W` by at most five times the
/// reported bracket plus the tolerance itself.
#[test]
fn quadrature_is_converged() {
    let f = VectorField::van_der_pol();
    let coarse = OracleConfig::default();
    let fine = OracleConfig {
        rel_tol: coarse.rel_tol / 2.0,
        abs_tol: coarse.abs_tol / 2.0,
        ..coarse.clone()
    };
    let (a, b) = (
        Oracle::new(&f, &coarse).unwrap(),
        Oracle::new(&f, &fine).unwrap(),
    );
    for x in [[0.5, 0.5], [1.0, -0.5], [-1.2, 0.3], [0.2, 1.2]] {
        let (wa, wb) = (a.w(&x, 0.05, 2).unwrap(), b.w(&x, 0.05, 2).unwrap());
        assert_eq!(wa.membership, Membership::Converged);
        let reported = (wa.upper - wa.lower) + coarse.rel_tol * wa.value;
        assert!(
            (wa.value - wb.value).abs() <= 5.0 * reported,
            "{wa:?} vs {wb:?}"
        );
    }
}

#[test]
fn integration_examples() {
    let decay = VectorField::new(vec![Poly::var(1, 0).scale(-1.0)]).unwrap();
    let cfg = OracleConfig {
        eta: 1e-6,
        ..OracleConfig::default()
    };
    assert!((flow(&decay, &[1.0], 1.0, &cfg).unwrap()[0] - (-1.0f64).exp()).abs() < 1e-7);
    let tr = integrate(
        &VectorField::scalar_cubic(),
        &[0.5],
        100.0,
        &OracleConfig::default(),
    )
    .unwrap();
    assert_eq!(tr.states[0], vec![0.5]);
    assert_eq!(tr.terminal, Terminal::EnteredBall);
    assert!(norm(tr.final_state()) <= 0.1 + 1e-12);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]) && tr.times[0] == 0.0);
    let esc = integrate(
        &VectorField::scalar_cubic(),
        &[1.5],
        100.0,
        &OracleConfig::default(),
    )
    .unwrap();
    assert_eq!(esc.terminal, Terminal::Escaped);
}

#[test]
fn entry_time_closed_forms() {
    let decay = VectorField::new(vec![Poly::var(1, 0).scale(-1.0)]).unwrap();
    let oracle = Oracle::new(
        &decay,
        &OracleConfig {
            eta: 1.0,
            ..OracleConfig::default()
        },
    )
    .unwrap();
    assert!((oracle.entry_time(&[2.0]).unwrap().unwrap() - 2f64.ln()).abs() < 1e-5);
    assert_eq!(oracle.entry_time(&[0.5]).unwrap(), Some(0.0));
    let cubic = Oracle::new(&VectorField::scalar_cubic(), &OracleConfig::default()).unwrap();
    assert_eq!(cubic.entry_time(&[1.5]).unwrap(), None);
}
