use proptest::prelude::*;
use roacert::dynamics::VectorField;
use roacert::pipeline::{certify, Certificate, RoaSpec};
use roacert::poly::{
    box_moments, lie_derivative, monomial_basis, norm_power, norm_squared, BoxDomain, Poly,
};
use roacert::sdp::{solve, PrimalPoint, Row, SdpProblem, SolveStatus, Var};
use roacert::sos::{
    compile, compile_unchecked, extract_certificate, sos_constraint, LinPoly, Role, SosError,
};

fn scalar_spec(d: u32) -> RoaSpec {
    RoaSpec::new(1.0, 1, 1.5, BoxDomain::symmetric(&[1.2]).unwrap(), d)
}

fn vdp_spec(d: u32) -> RoaSpec {
    RoaSpec::new(
        0.05,
        2,
        11.29f64.sqrt(),
        BoxDomain::symmetric(&[2.0, 2.7]).unwrap(),
        d,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Expanding `ZᵀQZ` and matching coefficients again is consistent for any PSD `Q`.
    #[test]
    fn gram_expansion_round_trips(n in 1usize..=3, half in 1u32..=2, seed in prop::collection::vec(-1.0..1.0f64, 100)) {
        let basis = monomial_basis(n, half);
        let k = basis.len();
        let l = nalgebra::DMatrix::from_fn(k, k, |i, j| seed[(i * k + j) % seed.len()]);
        let q = &l * l.transpose();
        let mut target = Poly::zero(n);
        for a in 0..k {
            for b in 0..k {
                let m = Poly::monomial(basis[a].mul(&basis[b]), q[(a, b)]);
                target = target.add(&m).unwrap();
            }
        }
        let rows = sos_constraint(&LinPoly::known(target), 0, &basis).unwrap();
        let x = PrimalPoint { blocks: vec![q.transpose().as_slice().to_vec()], block_sizes: vec![k], free: vec![], nonneg: vec![] };
        for (m, r) in &rows {
            let lhs = SdpProblem::eval_form(&r.entries, &x);
            prop_assert!((lhs - r.rhs).abs() <= 1e-12 * (1.0 + q.abs().max()), "{m}: {lhs} vs {}", r.rhs);
        }
    }
}

/// `|k₁ + ∇P·f + λ(1−P)‖x‖^{2β} + s(R²−‖x‖²)|` and the `k₂` analogue at `x`,
/// each relative to the sum of the absolute term values.
fn identity_errors(c: &Certificate, f: &VectorField, x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let (lambda, beta, r) = (c.spec.lambda, c.spec.beta, c.spec.radius);
    let e = |p: &Poly| p.eval(x).unwrap();
    let g = r * r - e(&norm_squared(n));
    let t1 = [
        e(&c.k1),
        e(&lie_derivative(&c.p_d, f).unwrap()),
        lambda * (1.0 - e(&c.p_d)) * e(&norm_power(n, beta)),
        e(&c.s) * g,
    ];
    let t2 = [e(&c.k2), -(e(&c.p_d) - 1.0), e(&c.p) * g];
    let rel =
        |t: &[f64]| t.iter().sum::<f64>().abs() / t.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    (rel(&t1), rel(&t2))
}

fn ball_points(n: usize, r: f64, count: usize) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    while out.len() < count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() < r * r {
            out.push(x);
        }
    }
    out
}

#[test]
fn solved_certificates_satisfy_both_identities_pointwise() {
    let cases = [
        (VectorField::scalar_cubic(), scalar_spec(8)),
        (VectorField::van_der_pol(), vdp_spec(8)),
    ];
    for (f, spec) in cases {
        let c = certify(&f, &spec).unwrap();
        for x in ball_points(f.nvars(), spec.radius, 1000) {
            let (e1, e2) = identity_errors(&c, &f, &x);
            assert!(e1 <= 1e-6 && e2 <= 1e-6, "x = {x:?}: {e1:e}, {e2:e}");
        }
        assert!(c.p_d.eval(&vec![0.0; f.nvars()]).unwrap() >= -1e-8);
    }
}

#[test]
fn optimum_is_non_increasing_in_degree() {
    let f = VectorField::scalar_cubic();
    let objectives: Vec<f64> = [4, 6, 8, 10]
        .iter()
        .map(|&d| certify(&f, &scalar_spec(d)).unwrap().objective)
        .collect();
    for w in objectives.windows(2) {
        assert!(w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0), "{objectives:?}");
    }
}

#[test]
fn objective_is_the_moment_integral_of_p_d() {
    for (f, spec) in [
        (VectorField::scalar_cubic(), scalar_spec(6)),
        (VectorField::van_der_pol(), vdp_spec(6)),
    ] {
        let c = certify(&f, &spec).unwrap();
        let mv = box_moments(spec.degree, &spec.domain).unwrap();
        // Hardening added margin·μ(Λ) after the solve.
        let integral = mv.integrate(&c.p_d) - c.margin * spec.domain.volume();
        assert!(
            (integral - c.objective).abs() <= 1e-7 * c.objective.abs().max(1.0),
            "{integral} vs {}",
            c.objective
        );
    }
}

#[test]
fn zero_field_is_solved_by_the_constant_one() {
    let f = VectorField::new(vec![Poly::zero(2), Poly::zero(2)]).unwrap();
    let spec = RoaSpec::new(
        1.0,
        1,
        2f64.sqrt(),
        BoxDomain::symmetric(&[1.0, 1.0]).unwrap(),
        4,
    );
    let c = certify(&f, &spec).unwrap();
    let area = spec.domain.volume();
    for x in ball_points(2, spec.radius, 200) {
        assert!(c.p_d.eval(&x).unwrap() >= 1.0 - 1e-5);
    }
    assert!(
        c.objective >= area * (1.0 - 1e-5),
        "{} < {area}",
        c.objective
    );
}

#[test]
fn contradictory_row_gives_typed_infeasibility() {
    let mut prog = compile(&scalar_spec(4), &VectorField::scalar_cubic()).unwrap();
    prog.problem.rows.push(Row {
        entries: vec![(Var::psd(0, 0, 0), 1.0)],
        rhs: -1.0,
    });
    prog.problem.labels.push("Q_J[0,0] = -1".into());
    let s = solve(&prog.problem, 1e-8).unwrap();
    assert_eq!(s.status, SolveStatus::Infeasible);
    assert!(matches!(
        extract_certificate(&prog, &s),
        Err(SosError::SolverFailure {
            status: SolveStatus::Infeasible
        })
    ));
}

#[test]
fn unchecked_compile_accepts_box_outside_ball() {
    let spec = RoaSpec::new(1.0, 1, 1.0, BoxDomain::symmetric(&[1.2]).unwrap(), 4);
    assert!(compile(&spec, &VectorField::scalar_cubic()).is_err());
    let prog = compile_unchecked(&spec, &VectorField::scalar_cubic()).unwrap();
    assert!(prog.block(Role::J).is_some());
}

#[test]
fn van_der_pol_block_sizes() {
    let prog = compile(&vdp_spec(12), &VectorField::van_der_pol()).unwrap();
    let size = |r| prog.block(r).unwrap().1.size();
    assert_eq!(
        (size(Role::J), size(Role::K1), size(Role::K2), size(Role::S)),
        (28, 45, 28, 36)
    );
    assert_eq!(
        prog.problem.n_rows(),
        monomial_basis(2, 16).len() + monomial_basis(2, 12).len() + 1
    );
}
