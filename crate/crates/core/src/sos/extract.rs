use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CompiledProgram, GramBlock, Role, SosError};
use crate::dynamics::VectorField;
use crate::pipeline::{Certificate, CertificateStatus, SolverInfo};
use crate::poly::{lie_derivative, norm_power, norm_squared, Poly, PolyError};
use crate::sdp::{SdpSolution, Var};

/// Relative identity residual above which a certificate is unverified.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

/// Largest coefficient of each identity's residual and of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub decrease: f64,
    pub decrease_scale: f64,
    pub boundary: f64,
    pub boundary_scale: f64,
}

impl IdentityResiduals {
    /// Residuals over term scale, with the scale floored at 1 so that
    /// identities whose terms all vanish (`P_d ≡ 1`) are not amplified.
    pub fn relative(&self) -> f64 {
        (self.decrease / self.decrease_scale.max(1.0))
            .max(self.boundary / self.boundary_scale.max(1.0))
    }
}

/// Symmetric Gram matrix of a PSD block from a primal solution.
pub fn gram_matrix(solution: &SdpSolution, block: usize) -> DMatrix<f64> {
    let x = solution.primal.block_matrix(block);
    (&x + x.transpose()) * 0.5
}

fn gram_poly(block: &GramBlock, q: &DMatrix<f64>) -> Poly {
    block.poly(0).evaluate(|v| match v {
        Var::Psd { row, col, .. } => q[(row, col)],
        _ => 0.0,
    })
}

/// Re-expands `k₁ + ∇Pᵀf + λ(1−P)‖x‖^{2β} + s(R²−‖x‖²)` and
/// `k₂ − (P−1) + p(R²−‖x‖²)`.
#[allow(clippy::too_many_arguments)]
pub fn identity_residuals(
    pd: &Poly,
    s: &Poly,
    p: &Poly,
    k1: &Poly,
    k2: &Poly,
    f: &VectorField,
    lambda: f64,
    beta: u32,
    radius: f64,
) -> Result<IdentityResiduals, PolyError> {
    let n = pd.nvars();
    let one = Poly::constant(n, 1.0);
    let g = Poly::constant(n, radius * radius).sub(&norm_squared(n))?;
    let terms1 = [
        k1.clone(),
        lie_derivative(pd, f)?,
        one.sub(pd)?.mul(&norm_power(n, beta))?.scale(lambda),
        s.mul(&g)?,
    ];
    let terms2 = [k2.clone(), pd.sub(&one)?.scale(-1.0), p.mul(&g)?];
    let sum = |ts: &[Poly]| -> Result<(f64, f64), PolyError> {
        let mut acc = Poly::zero(n);
        let mut scale = 0.0f64;
        for t in ts {
            scale = scale.max(t.max_abs_coeff());
            acc = add_exact(&acc, t)?;
        }
        Ok((acc.max_abs_coeff(), scale))
    };
    let (decrease, decrease_scale) = sum(&terms1)?;
    let (boundary, boundary_scale) = sum(&terms2)?;
    Ok(IdentityResiduals {
        decrease,
        decrease_scale,
        boundary,
        boundary_scale,
    })
}

/// Addition without pruning, so cancellation residue stays visible.
fn add_exact(a: &Poly, b: &Poly) -> Result<Poly, PolyError> {
    Poly::from_terms(
        a.nvars(),
        a.terms()
            .chain(b.terms())
            .map(|(m, c)| (m.exponents().to_vec(), c)),
    )
}

/// Reconstructs `P_d` and the multipliers in the original coordinates and
/// measures how well they satisfy the identities.
pub fn extract_certificate(
    prog: &CompiledProgram,
    solution: &SdpSolution,
) -> Result<Certificate, SosError> {
    if !solution.status.is_solved() {
        return Err(SosError::SolverFailure {
            status: solution.status,
        });
    }
    extract(prog, solution)
}

/// Reads polynomials out of an iterate the solver did not accept, for
/// inspection only. The result is always `Unverified`.
pub fn extract_unsolved(
    prog: &CompiledProgram,
    solution: &SdpSolution,
) -> Result<Certificate, SosError> {
    let mut cert = extract(prog, solution)?;
    cert.status = CertificateStatus::Unverified;
    Ok(cert)
}

fn extract(prog: &CompiledProgram, solution: &SdpSolution) -> Result<Certificate, SosError> {
    if solution.primal.block_sizes != prog.problem.psd_blocks
        || solution.primal.free.len() != prog.free.size()
    {
        return Err(SosError::Mismatch("block sizes differ".into()));
    }
    let n = prog.field.nvars();
    let r = prog.scale;
    let unscale = vec![1.0 / r; n];
    let mut polys = std::collections::HashMap::new();
    let mut gram_min_eigenvalues = Vec::new();
    for (b, block) in prog.blocks.iter().enumerate() {
        let q = gram_matrix(solution, b);
        gram_min_eigenvalues.push((block.role, q.clone().symmetric_eigenvalues().min()));
        polys.insert(block.role, gram_poly(block, &q).scale_vars(&unscale));
    }
    let p_scaled = prog.free.poly(0).evaluate(|v| match v {
        Var::Free(i) => solution.primal.free[i],
        _ => 0.0,
    });
    let r2 = r * r;
    let pd = polys.remove(&Role::J).expect("J block");
    let k1 = polys.remove(&Role::K1).expect("k1 block");
    let k2 = polys.remove(&Role::K2).expect("k2 block");
    let s = polys.remove(&Role::S).expect("s block").scale(1.0 / r2);
    let p = p_scaled.scale_vars(&unscale).scale(1.0 / r2);
    let spec = &prog.spec;
    let residuals = identity_residuals(
        &pd,
        &s,
        &p,
        &k1,
        &k2,
        &prog.field,
        spec.lambda,
        spec.beta,
        r,
    )?;
    let volume_scale = r.powi(n as i32);
    Ok(Certificate {
        spec: spec.clone(),
        plan: prog.plan,
        p_d: pd,
        margin: 0.0,
        s,
        p,
        k1,
        k2,
        objective: solution.primal_objective * volume_scale,
        residuals,
        gram_min_eigenvalues,
        solver: SolverInfo::from_solution(solution, &prog.problem, spec.tol),
        verification: None,
        grid_verification: None,
        checks: None,
        volume: None,
        problem_file_sha256: None,
        theory: None,
        status: if residuals.relative() <= RESIDUAL_TOLERANCE {
            CertificateStatus::Unchecked
        } else {
            CertificateStatus::Unverified
        },
    })
}
