//! Sum-of-squares programs for Lyapunov-type inner approximations, compiled
//! to block-diagonal SDPs.
//!
//! Unknown polynomials are carried as [`LinPoly`]: a known constant part plus
//! one polynomial per scalar SDP variable. A Gram block over basis `Z`
//! represents `ZᵀQZ`; an upper-triangle entry `Q_rc` contributes
//! `(2 − δ_rc) z_r z_c`.

mod compile;
mod extract;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VectorField;
use crate::pipeline::{RoaSpec, SpecError};
use crate::poly::{monomial_basis, Monomial, Poly, PolyError};
use crate::sdp::{Row, SolveStatus, Var};

pub use compile::compile_unchecked;
pub use compile::{compile, CompiledProgram, Identity, RowOrigin};
pub use extract::{
    extract_certificate, extract_unsolved, gram_matrix, identity_residuals, IdentityResiduals,
    RESIDUAL_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum SosError {
    #[error("degree {0} is odd; the program needs an even degree")]
    OddDegree(u32),
    #[error("degree must be at least 2, got {0}")]
    DegreeTooSmall(u32),
    #[error("Gram basis cannot produce monomial {monomial} of the target")]
    BasisTooSmall { monomial: String },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("solver returned {status:?}")]
    SolverFailure { status: SolveStatus },
    #[error("solution does not match the compiled problem: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    J,
    K1,
    K2,
    S,
    P,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::J => "J",
            Role::K1 => "k1",
            Role::K2 => "k2",
            Role::S => "s",
            Role::P => "p",
        }
    }
}

/// Half-degree monomial basis of one multiplier. Role `P` is the free
/// multiplier: its basis lists coefficient monomials and carries no PSD
/// constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramBlock {
    pub role: Role,
    pub basis: Vec<Monomial>,
}

impl GramBlock {
    pub fn new(role: Role, nvars: usize, degree: u32) -> GramBlock {
        let half = if role == Role::P { degree } else { degree / 2 };
        GramBlock {
            role,
            basis: monomial_basis(nvars, half),
        }
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn is_psd(&self) -> bool {
        self.role != Role::P
    }

    /// `ZᵀQZ` (or `Σ p_j z^{m_j}` for the free role) in terms of block
    /// variables, with `index` the PSD block (or free offset).
    pub fn poly(&self, index: usize) -> LinPoly {
        let n = self.basis.first().map_or(1, Monomial::nvars);
        let mut out = LinPoly::zero(n);
        if self.is_psd() {
            for c in 0..self.size() {
                for r in 0..=c {
                    let w = if r == c { 1.0 } else { 2.0 };
                    let m = self.basis[r].mul(&self.basis[c]);
                    out.add_unknown(Var::psd(index, r, c), &Poly::monomial(m, w));
                }
            }
        } else {
            for (j, m) in self.basis.iter().enumerate() {
                out.add_unknown(Var::Free(index + j), &Poly::monomial(m.clone(), 1.0));
            }
        }
        out
    }
}

/// Degrees of every multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreePlan {
    pub j: u32,
    pub k1: u32,
    pub s: u32,
    pub k2: u32,
    pub p: u32,
}

fn even_ceil(d: u32) -> u32 {
    d + d % 2
}

/// Smallest even degrees that make both identities matchable.
pub fn degree_plan(spec: &RoaSpec, f: &VectorField) -> Result<DegreePlan, SosError> {
    let d = spec.degree;
    if d % 2 == 1 {
        return Err(SosError::OddDegree(d));
    }
    if d < 2 {
        return Err(SosError::DegreeTooSmall(d));
    }
    let lie = d - 1 + f.degree().max(1);
    let k1 = even_ceil(lie.max(d + 2 * spec.beta));
    let k2 = even_ceil(d);
    Ok(DegreePlan {
        j: d,
        k1,
        s: k1 - 2,
        k2,
        p: k2 - 2,
    })
}

/// Polynomial affine in SDP variables: `constant + Σ_v v · unknowns[v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinPoly {
    pub constant: Poly,
    pub unknowns: BTreeMap<Var, Poly>,
}

impl LinPoly {
    pub fn zero(nvars: usize) -> LinPoly {
        LinPoly {
            constant: Poly::zero(nvars),
            unknowns: BTreeMap::new(),
        }
    }

    pub fn known(p: Poly) -> LinPoly {
        LinPoly {
            constant: p,
            unknowns: BTreeMap::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.constant.nvars()
    }

    pub fn add_unknown(&mut self, v: Var, p: &Poly) {
        let entry = self
            .unknowns
            .entry(v)
            .or_insert_with(|| Poly::zero(p.nvars()));
        *entry = entry.add(p).expect("matching variable count");
    }

    pub fn add(&self, other: &LinPoly) -> LinPoly {
        self.axpy(1.0, other)
    }

    /// `self + a · other`.
    pub fn axpy(&self, a: f64, other: &LinPoly) -> LinPoly {
        let mut out = self.clone();
        out.constant = out
            .constant
            .axpy(a, &other.constant)
            .expect("matching variable count");
        for (v, p) in &other.unknowns {
            out.add_unknown(*v, &p.scale(a));
        }
        out
    }

    pub fn map(&self, f: impl Fn(&Poly) -> Poly) -> LinPoly {
        LinPoly {
            constant: f(&self.constant),
            unknowns: self.unknowns.iter().map(|(v, p)| (*v, f(p))).collect(),
        }
    }

    pub fn mul_poly(&self, q: &Poly) -> LinPoly {
        self.map(|p| p.mul(q).expect("matching variable count"))
    }

    pub fn monomials(&self) -> BTreeSet<Monomial> {
        let mut set: BTreeSet<Monomial> = self.constant.terms().map(|(m, _)| m.clone()).collect();
        for p in self.unknowns.values() {
            set.extend(p.terms().map(|(m, _)| m.clone()));
        }
        set
    }

    /// Concrete polynomial for given variable values.
    pub fn evaluate(&self, value: impl Fn(Var) -> f64) -> Poly {
        let mut out = self.constant.clone();
        for (v, p) in &self.unknowns {
            out = out.axpy(value(*v), p).expect("matching variable count");
        }
        out
    }

    /// Coefficient of `m` as a linear form plus constant.
    pub fn coefficient(&self, m: &Monomial) -> (Vec<(Var, f64)>, f64) {
        let form = self
            .unknowns
            .iter()
            .filter_map(|(v, p)| {
                let c = p.coeff(m);
                (c != 0.0).then_some((*v, c))
            })
            .collect();
        (form, self.constant.coeff(m))
    }
}

/// Rows equating the coefficients of `target` with those of `ZᵀQZ`, where `Q`
/// is PSD block `block` over `basis`: one row per monomial of degree at most
/// twice the basis degree, in graded order.
pub fn sos_constraint(
    target: &LinPoly,
    block: usize,
    basis: &[Monomial],
) -> Result<Vec<(Monomial, Row)>, SosError> {
    let n = target.nvars();
    let half = basis.iter().map(Monomial::degree).max().unwrap_or(0);
    let gram = GramBlock {
        role: Role::J,
        basis: basis.to_vec(),
    }
    .poly(block);
    let reachable: BTreeSet<Monomial> = gram.monomials();
    for m in target.monomials() {
        if !reachable.contains(&m) {
            return Err(SosError::BasisTooSmall {
                monomial: m.to_string(),
            });
        }
    }
    let diff = gram.axpy(-1.0, target);
    Ok(monomial_basis(n, 2 * half)
        .into_iter()
        .map(|m| {
            let (entries, constant) = diff.coefficient(&m);
            let mut row = Row {
                entries,
                rhs: -constant,
            };
            row.canonicalize();
            (m, row)
        })
        .collect())
}
