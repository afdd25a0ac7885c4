use serde::{Deserialize, Serialize};

use super::{degree_plan, sos_constraint, DegreePlan, GramBlock, LinPoly, Role, SosError};
use crate::dynamics::VectorField;
use crate::pipeline::RoaSpec;
use crate::poly::{
    lie_derivative, monomial_integral, norm_power, norm_squared, BoxDomain, Monomial, Poly,
};
use crate::sdp::{Row, SdpProblem, Var};

/// Which relation a row enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identity {
    /// `k₁ = −∇Jᵀf − λ(1−J)‖x‖^{2β} − s(R²−‖x‖²)`.
    Decrease,
    /// `k₂ = (J−1) − p(R²−‖x‖²)`.
    Boundary,
    /// `J(0) − t = 0`, `t ≥ 0`.
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOrigin {
    pub identity: Identity,
    pub monomial: Monomial,
    /// Row before normalization.
    pub raw: Row,
    /// Divisor applied to the raw row.
    pub scale: f64,
}

/// Compiled SOS program. The SDP is posed in the coordinates `z = x / R`, so
/// the ball becomes the unit ball and the box becomes `Λ / R`.
#[derive(Debug, Clone)]
pub struct CompiledProgram {
    pub problem: SdpProblem,
    pub plan: DegreePlan,
    /// PSD blocks in SDP order: `J`, `k₁`, `k₂`, `s`.
    pub blocks: Vec<GramBlock>,
    /// Coefficient monomials of the free multiplier `p`.
    pub free: GramBlock,
    pub provenance: Vec<RowOrigin>,
    pub spec: RoaSpec,
    pub field: VectorField,
    /// `R`: the SDP objective equals `R^{−n} ∫_Λ J`.
    pub scale: f64,
}

impl CompiledProgram {
    pub fn block(&self, role: Role) -> Option<(usize, &GramBlock)> {
        self.blocks.iter().enumerate().find(|(_, b)| b.role == role)
    }

    /// Rows produced by the polynomial identities (excluding `J(0) ≥ 0`).
    pub fn identity_rows(&self) -> usize {
        self.provenance
            .iter()
            .filter(|o| o.identity != Identity::Origin)
            .count()
    }
}

/// Builds the SDP after validating the `RoaSpec`.
pub fn compile(spec: &RoaSpec, f: &VectorField) -> Result<CompiledProgram, SosError> {
    spec.validate(f.nvars())?;
    compile_unchecked(spec, f)
}

/// [`compile`] without the box-in-ball check.
pub fn compile_unchecked(spec: &RoaSpec, f: &VectorField) -> Result<CompiledProgram, SosError> {
    let n = f.nvars();
    let plan = degree_plan(spec, f)?;
    let r = spec.radius;
    let fs = f.rescaled(r);
    let lam = spec.lambda * r.powi(2 * spec.beta as i32);

    let blocks = vec![
        GramBlock::new(Role::J, n, plan.j),
        GramBlock::new(Role::K1, n, plan.k1),
        GramBlock::new(Role::K2, n, plan.k2),
        GramBlock::new(Role::S, n, plan.s),
    ];
    let free = GramBlock::new(Role::P, n, plan.p);
    let j = blocks[0].poly(0);
    let s = blocks[3].poly(3);
    let p = free.poly(0);

    let one = Poly::constant(n, 1.0);
    let g = one.sub(&norm_squared(n))?;
    let np = norm_power(n, spec.beta);

    // −∇Jᵀf − λ(1 − J)‖z‖^{2β} − s(1 − ‖z‖²)
    let lie = j.map(|q| lie_derivative(q, &fs).expect("matching variable count"));
    let decrease = lie
        .map(|q| q.scale(-1.0))
        .add(&LinPoly::known(np.scale(-lam)))
        .add(&j.mul_poly(&np.scale(lam)))
        .axpy(-1.0, &s.mul_poly(&g));
    // (J − 1) − p(1 − ‖z‖²)
    let boundary = j
        .add(&LinPoly::known(one.scale(-1.0)))
        .axpy(-1.0, &p.mul_poly(&g));

    let mut provenance = Vec::new();
    for (identity, target, block) in [
        (Identity::Decrease, &decrease, 1),
        (Identity::Boundary, &boundary, 2),
    ] {
        for (monomial, raw) in sos_constraint(target, block, &blocks[block].basis)? {
            provenance.push(RowOrigin {
                identity,
                monomial,
                raw,
                scale: 1.0,
            });
        }
    }
    provenance.push(RowOrigin {
        identity: Identity::Origin,
        monomial: Monomial::one(n),
        raw: Row {
            entries: vec![(Var::psd(0, 0, 0), 1.0), (Var::Nonneg(0), -1.0)],
            rhs: 0.0,
        },
        scale: 1.0,
    });

    let mut rows = Vec::with_capacity(provenance.len());
    let mut labels = Vec::with_capacity(provenance.len());
    for origin in &mut provenance {
        let scale = origin.raw.max_abs();
        let scale = if scale > 0.0 { scale } else { 1.0 };
        origin.scale = scale;
        rows.push(Row {
            entries: origin
                .raw
                .entries
                .iter()
                .map(|&(v, c)| (v, c / scale))
                .collect(),
            rhs: origin.raw.rhs / scale,
        });
        let tag = match origin.identity {
            Identity::Decrease => "k1",
            Identity::Boundary => "k2",
            Identity::Origin => "J(0)",
        };
        labels.push(format!("{tag} {}", origin.monomial));
    }

    let domain: BoxDomain = spec.domain.scaled(1.0 / r);
    let mut objective = Vec::new();
    for (v, q) in &j.unknowns {
        let c: f64 = q
            .terms()
            .map(|(m, c)| c * monomial_integral(m, &domain))
            .sum();
        if c != 0.0 {
            objective.push((*v, c));
        }
    }

    let problem = SdpProblem {
        psd_blocks: blocks.iter().map(GramBlock::size).collect(),
        n_free: free.size(),
        n_nonneg: 1,
        rows,
        objective,
        labels,
    };
    Ok(CompiledProgram {
        problem,
        plan,
        blocks,
        free,
        provenance,
        spec: spec.clone(),
        field: f.clone(),
        scale: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::monomial_basis;

    fn scalar_spec(d: u32) -> RoaSpec {
        RoaSpec::new(1.0, 1, 1.5, BoxDomain::symmetric(&[1.2]).unwrap(), d)
    }

    #[test]
    fn scalar_problem_shape() {
        let prog = compile(&scalar_spec(4), &VectorField::scalar_cubic()).unwrap();
        // deg k1 = max(4-1+3, 4+2) = 6, deg k2 = 4
        assert_eq!(prog.plan.k1, 6);
        assert_eq!(prog.problem.psd_blocks.len(), 4);
        assert_eq!(prog.problem.psd_blocks, vec![3, 4, 3, 3]);
        assert_eq!(prog.problem.n_free, 3);
        assert_eq!(prog.identity_rows(), 7 + 5);
        assert_eq!(prog.problem.n_rows(), 13);
        prog.problem.validate().unwrap();
        for row in &prog.problem.rows {
            if !row.entries.is_empty() {
                assert!((row.max_abs() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn objective_only_touches_j() {
        let prog = compile(&scalar_spec(6), &VectorField::scalar_cubic()).unwrap();
        assert!(prog
            .problem
            .objective
            .iter()
            .all(|(v, _)| matches!(v, Var::Psd { block: 0, .. })));
    }

    #[test]
    fn every_row_has_a_distinct_monomial_per_identity() {
        let spec = RoaSpec::new(
            0.05,
            2,
            (11.29f64).sqrt(),
            BoxDomain::symmetric(&[2.0, 2.7]).unwrap(),
            6,
        );
        let prog = compile(&spec, &VectorField::van_der_pol()).unwrap();
        let k1: Vec<_> = prog
            .provenance
            .iter()
            .filter(|o| o.identity == Identity::Decrease)
            .map(|o| o.monomial.clone())
            .collect();
        assert_eq!(k1, monomial_basis(2, prog.plan.k1));
    }

    #[test]
    fn box_outside_ball_rejected() {
        let spec = RoaSpec::new(1.0, 1, 1.0, BoxDomain::symmetric(&[1.2]).unwrap(), 4);
        assert!(matches!(
            compile(&spec, &VectorField::scalar_cubic()),
            Err(SosError::Spec(_))
        ));
    }
}
