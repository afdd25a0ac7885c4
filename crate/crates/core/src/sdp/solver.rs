//! Infeasible-start primal–dual path following with the HKM search direction
//! and Mehrotra predictor–corrector steps.
//!
//! Free variables are kept in the Newton system as a saddle block and
//! eliminated through a second Schur complement. Infeasibility is detected
//! from the iterates themselves: once the dual (primal) objective diverges the
//! normalized multiplier (primal point) is tested as a Farkas ray.

use log::debug;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PrimalPoint, SdpProblem, SdpSolution, SolveStatus, Var};

/// Iterations without a 10% drop in the worst residual before giving up.
const STALL_ITERATIONS: usize = 10;
/// Diagonal shifts tried (growing 100× from `1e-15·max M_ii`).
const MAX_SHIFTS: i32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Target for relative gap, scaled residuals and average complementarity.
    pub tol: f64,
    /// Looser target accepted as `NearOptimal` when progress stops.
    pub near_tol: f64,
    pub max_iter: usize,
    /// Tolerance on the Farkas conditions for `Infeasible` / `Unbounded`.
    pub ray_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            near_tol: 1e-5,
            max_iter: 120,
            ray_tol: 1e-8,
        }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        SolverSettings {
            tol,
            near_tol: tol.max(1e-5),
            ray_tol: tol,
            ..Default::default()
        }
    }
}

/// Row `i` restricted to one PSD block.
struct BlockRow {
    row: usize,
    /// Upper-triangle entries `(r, c, coef)`.
    entries: Vec<(usize, usize, f64)>,
    /// Indices touched by the row and the symmetric matrix on them.
    support: Vec<usize>,
    local: DMatrix<f64>,
}

struct Block {
    n: usize,
    rows: Vec<BlockRow>,
    c: DMatrix<f64>,
}

struct Data {
    m: usize,
    b: DVector<f64>,
    blocks: Vec<Block>,
    af: DMatrix<f64>,
    al: DMatrix<f64>,
    cf: DVector<f64>,
    cl: DVector<f64>,
}

fn sym_add(mat: &mut DMatrix<f64>, r: usize, c: usize, v: f64) {
    if r == c {
        mat[(r, r)] += v;
    } else {
        mat[(r, c)] += 0.5 * v;
        mat[(c, r)] += 0.5 * v;
    }
}

impl Data {
    fn new(p: &SdpProblem) -> Data {
        let m = p.n_rows();
        let mut per_block: Vec<Vec<BlockRow>> = p.psd_blocks.iter().map(|_| Vec::new()).collect();
        let mut af = DMatrix::zeros(m, p.n_free);
        let mut al = DMatrix::zeros(m, p.n_nonneg);
        let mut b = DVector::zeros(m);
        for (i, row) in p.rows.iter().enumerate() {
            b[i] = row.rhs;
            let mut row = row.clone();
            row.canonicalize();
            let mut touched: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); p.psd_blocks.len()];
            for &(v, coef) in &row.entries {
                match v {
                    Var::Psd {
                        block,
                        row: r,
                        col: c,
                    } => touched[block].push((r, c, coef)),
                    Var::Free(j) => af[(i, j)] += coef,
                    Var::Nonneg(j) => al[(i, j)] += coef,
                }
            }
            for (blk, entries) in touched.into_iter().enumerate() {
                if entries.is_empty() {
                    continue;
                }
                let mut support: Vec<usize> =
                    entries.iter().flat_map(|&(r, c, _)| [r, c]).collect();
                support.sort_unstable();
                support.dedup();
                let k = support.len();
                let pos = |x: usize| support.binary_search(&x).unwrap();
                let mut local = DMatrix::zeros(k, k);
                for &(r, c, coef) in &entries {
                    sym_add(&mut local, pos(r), pos(c), coef);
                }
                per_block[blk].push(BlockRow {
                    row: i,
                    entries,
                    support,
                    local,
                });
            }
        }
        let mut cf = DVector::zeros(p.n_free);
        let mut cl = DVector::zeros(p.n_nonneg);
        let mut cs: Vec<DMatrix<f64>> =
            p.psd_blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for &(v, coef) in &p.objective {
            match v {
                Var::Psd { block, row, col } => sym_add(&mut cs[block], row, col, coef),
                Var::Free(j) => cf[j] += coef,
                Var::Nonneg(j) => cl[j] += coef,
            }
        }
        let blocks = per_block
            .into_iter()
            .zip(cs)
            .zip(&p.psd_blocks)
            .map(|((rows, c), &n)| Block { n, rows, c })
            .collect();
        Data {
            m,
            b,
            blocks,
            af,
            al,
            cf,
            cl,
        }
    }

    /// `A(X) + A_f x_f + A_l x_l`.
    fn apply(&self, x: &[DMatrix<f64>], xf: &DVector<f64>, xl: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.af * xf + &self.al * xl;
        for (blk, xb) in self.blocks.iter().zip(x) {
            for br in &blk.rows {
                out[br.row] += br
                    .entries
                    .iter()
                    .map(|&(r, c, v)| v * xb[(r, c)])
                    .sum::<f64>();
            }
        }
        out
    }

    /// Same as [`Data::apply`] restricted to the PSD part, with nonsymmetric
    /// arguments allowed (`⟨A_i, G⟩` for symmetric `A_i`).
    fn apply_psd(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, xb) in self.blocks.iter().zip(x) {
            for br in &blk.rows {
                out[br.row] += br
                    .entries
                    .iter()
                    .map(|&(r, c, v)| {
                        if r == c {
                            v * xb[(r, r)]
                        } else {
                            0.5 * v * (xb[(r, c)] + xb[(c, r)])
                        }
                    })
                    .sum::<f64>();
            }
        }
        out
    }

    /// `Σ yᵢ A_ib` for every block.
    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut s = DMatrix::zeros(blk.n, blk.n);
                for br in &blk.rows {
                    for &(r, c, v) in &br.entries {
                        sym_add(&mut s, r, c, y[br.row] * v);
                    }
                }
                s
            })
            .collect()
    }

    fn objective(&self, x: &[DMatrix<f64>], xf: &DVector<f64>, xl: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .zip(x)
            .map(|(blk, xb)| blk.c.dot(xb))
            .sum::<f64>()
            + self.cf.dot(xf)
            + self.cl.dot(xl)
    }

    /// Schur complement `M_ij = Σ_b ⟨A_ib, X_b A_jb S_b⁻¹⟩ + (A_l D A_lᵀ)_ij`.
    fn schur(
        &self,
        x: &[DMatrix<f64>],
        sinv: &[DMatrix<f64>],
        xl: &DVector<f64>,
        zl: &DVector<f64>,
    ) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.m, self.m);
        for ((blk, xb), sb) in self.blocks.iter().zip(x).zip(sinv) {
            let cols: Vec<Vec<f64>> = blk
                .rows
                .par_iter()
                .map(|bj| {
                    let xk = xb.select_columns(&bj.support);
                    let sk = sb.select_rows(&bj.support);
                    let g = xk * &bj.local * sk;
                    blk.rows
                        .iter()
                        .map(|bi| {
                            bi.entries
                                .iter()
                                .map(|&(r, c, v)| {
                                    if r == c {
                                        v * g[(r, r)]
                                    } else {
                                        0.5 * v * (g[(r, c)] + g[(c, r)])
                                    }
                                })
                                .sum()
                        })
                        .collect()
                })
                .collect();
            for (bj, col) in blk.rows.iter().zip(cols) {
                for (bi, val) in blk.rows.iter().zip(col) {
                    m[(bi.row, bj.row)] += val;
                }
            }
        }
        if self.al.ncols() > 0 {
            let d = DVector::from_iterator(xl.len(), xl.iter().zip(zl.iter()).map(|(a, b)| a / b));
            let scaled = DMatrix::from_fn(self.m, self.al.ncols(), |i, j| self.al[(i, j)] * d[j]);
            m += scaled * self.al.transpose();
        }
        let mt = m.transpose();
        (m + mt) * 0.5
    }

    fn rhs_norm(&self) -> f64 {
        self.b.norm()
    }

    fn cost_norm(&self) -> f64 {
        (self.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>()
            + self.cf.norm_squared()
            + self.cl.norm_squared())
        .sqrt()
    }
}

/// Factorization of the Newton saddle system `[M A_f; A_fᵀ 0]`.
struct Saddle {
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    minv_af: DMatrix<f64>,
    reduced: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Saddle {
    /// Factorizations of `M` to try. Cholesky when it succeeds; otherwise
    /// rounding has made `M` numerically indefinite, and both an LU of `M`
    /// and a Cholesky of `M` plus the smallest workable diagonal shift are
    /// offered. Neither dominates near degenerate optima.
    fn candidates(m: DMatrix<f64>, af: &DMatrix<f64>) -> Vec<Saddle> {
        if let Some(c) = m.clone().cholesky() {
            return Saddle::finish(Some(c), None, af).into_iter().collect();
        }
        let mut out = Vec::new();
        let lu = m.clone().lu();
        if lu.is_invertible() {
            out.extend(Saddle::finish(None, Some(lu), af));
        }
        let scale = m.diagonal().amax().max(1e-300);
        let mut shifted = m;
        let mut shift = 0.0;
        for k in 0..MAX_SHIFTS {
            let next = 1e-15 * scale * 100f64.powi(k);
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += next - shift;
            }
            shift = next;
            if let Some(c) = shifted.clone().cholesky() {
                out.extend(Saddle::finish(Some(c), None, af));
                break;
            }
        }
        out
    }

    fn finish(
        chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
        lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
        af: &DMatrix<f64>,
    ) -> Option<Saddle> {
        let mut s = Saddle {
            chol,
            lu,
            minv_af: DMatrix::zeros(0, 0),
            reduced: None,
        };
        if af.ncols() > 0 {
            s.minv_af = s.solve_m(af.clone());
            let t = af.transpose() * &s.minv_af;
            let t = (&t + t.transpose()) * 0.5;
            let l = t.lu();
            if !l.is_invertible() {
                return None;
            }
            s.reduced = Some(l);
        }
        Some(s)
    }

    fn solve_m(&self, rhs: DMatrix<f64>) -> DMatrix<f64> {
        match (&self.chol, &self.lu) {
            (Some(c), _) => c.solve(&rhs),
            (None, Some(l)) => l.solve(&rhs).unwrap_or(rhs),
            _ => unreachable!(),
        }
    }

    /// Returns `(dy, dx_f)`.
    fn solve(
        &self,
        h: &DVector<f64>,
        rf: &DVector<f64>,
        af: &DMatrix<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let mh = self
            .solve_m(DMatrix::from_column_slice(h.len(), 1, h.as_slice()))
            .column(0)
            .into_owned();
        match &self.reduced {
            None => (mh, DVector::zeros(0)),
            Some(t) => {
                let rhs = af.transpose() * &mh - rf;
                let dxf = t.solve(&rhs).unwrap_or_else(|| DVector::zeros(rhs.len()));
                let dy = mh - &self.minv_af * &dxf;
                (dy, dxf)
            }
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest `α` with `X + α dX ⪰ 0`, `f64::INFINITY` if unbounded.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(a) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(b) = l.solve_lower_triangular(&a.transpose()) else {
        return 0.0;
    };
    let mut z = b;
    symmetrize(&mut z);
    let lmin = z.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_vec(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues().min()
}

fn inverse_spd(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = s.clone().cholesky()?.inverse();
    let mut inv = inv;
    symmetrize(&mut inv);
    Some(inv)
}

#[derive(Clone)]
struct Iterate {
    x: Vec<DMatrix<f64>>,
    xf: DVector<f64>,
    xl: DVector<f64>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    zl: DVector<f64>,
}

#[derive(Clone)]
struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rdf: DVector<f64>,
    rdl: DVector<f64>,
    pinf: f64,
    dinf: f64,
    pobj: f64,
    dobj: f64,
    gap: f64,
    mu: f64,
}

fn residuals(d: &Data, it: &Iterate, nu: f64, bnorm: f64, cnorm: f64) -> Residuals {
    let rp = &d.b - d.apply(&it.x, &it.xf, &it.xl);
    let aty = d.adjoint(&it.y);
    let rd: Vec<DMatrix<f64>> = d
        .blocks
        .iter()
        .zip(aty)
        .zip(&it.s)
        .map(|((blk, a), s)| &blk.c - a - s)
        .collect();
    let rdf = &d.cf - d.af.transpose() * &it.y;
    let rdl = &d.cl - d.al.transpose() * &it.y - &it.zl;
    let dnorm = (rd.iter().map(|m| m.norm_squared()).sum::<f64>()
        + rdf.norm_squared()
        + rdl.norm_squared())
    .sqrt();
    let pobj = d.objective(&it.x, &it.xf, &it.xl);
    let dobj = d.b.dot(&it.y);
    let xs: f64 = it.x.iter().zip(&it.s).map(|(x, s)| x.dot(s)).sum::<f64>() + it.xl.dot(&it.zl);
    Residuals {
        pinf: rp.norm() / (1.0 + bnorm),
        dinf: dnorm / (1.0 + cnorm),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        mu: if nu > 0.0 { xs / nu } else { 0.0 },
        rp,
        rd,
        rdf,
        rdl,
        pobj,
        dobj,
    }
}

/// Farkas test for primal infeasibility: `bᵀy = 1`, `−Σ yᵢAᵢ ⪰ 0`,
/// `A_fᵀy = 0`, `A_lᵀy ≤ 0`.
fn dual_ray(d: &Data, y: &DVector<f64>, eps: f64) -> Option<DVector<f64>> {
    let by = d.b.dot(y);
    if !(by > 0.0) {
        return None;
    }
    let yr = y / by;
    let scale = 1.0 + yr.amax();
    if (d.af.transpose() * &yr).amax() > eps * scale {
        return None;
    }
    if (d.al.transpose() * &yr).iter().any(|&v| v > eps * scale) {
        return None;
    }
    for a in d.adjoint(&yr) {
        if min_eig(&(-a)) < -eps * scale {
            return None;
        }
    }
    Some(yr)
}

/// Farkas test for dual infeasibility: `cᵀx = −1`, `A(x) = 0`, `x` in the cone.
fn primal_ray(d: &Data, it: &Iterate, eps: f64) -> bool {
    let cx = d.objective(&it.x, &it.xf, &it.xl);
    if !(cx < 0.0) {
        return false;
    }
    let t = -1.0 / cx;
    let xr: Vec<DMatrix<f64>> = it.x.iter().map(|x| x * t).collect();
    let scale = 1.0
        + xr.iter()
            .map(|x| x.amax())
            .fold(0.0, f64::max)
            .max(it.xf.amax() * t)
            .max(it.xl.amax() * t);
    let ax = d.apply(&xr, &(&it.xf * t), &(&it.xl * t));
    ax.amax() <= eps * scale && xr.iter().all(|x| min_eig(x) >= -eps * scale)
}

fn initial_point(d: &Data) -> Iterate {
    let mut x = Vec::new();
    let mut s = Vec::new();
    for blk in &d.blocks {
        let n = blk.n as f64;
        let mut xi = 10f64.max(n.sqrt());
        let mut eta = 10f64.max(n.sqrt()).max(blk.c.norm());
        for br in &blk.rows {
            let an = br.local.norm();
            xi = xi.max(n * (1.0 + d.b[br.row].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        let eta = (1.0 + eta) / n.sqrt().max(1.0);
        x.push(DMatrix::identity(blk.n, blk.n) * xi);
        s.push(DMatrix::identity(blk.n, blk.n) * eta.max(1.0));
    }
    let nl = d.al.ncols();
    let lscale = 10f64.max(d.b.amax());
    Iterate {
        x,
        xf: DVector::zeros(d.af.ncols()),
        xl: DVector::from_element(nl, lscale),
        y: DVector::zeros(d.m),
        s,
        zl: DVector::from_element(nl, 10f64.max(d.cl.amax())),
    }
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxf: DVector<f64>,
    dxl: DVector<f64>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dzl: DVector<f64>,
}

/// Solves the linearized system for complementarity targets given as
/// `K_b = R_c S⁻¹` and `k_l = r_c / z`.
fn direction(
    d: &Data,
    it: &Iterate,
    res: &Residuals,
    sinv: &[DMatrix<f64>],
    saddle: &Saddle,
    k: &[DMatrix<f64>],
    kl: &DVector<f64>,
) -> Direction {
    let ratio = DVector::from_iterator(
        it.xl.len(),
        it.xl.iter().zip(it.zl.iter()).map(|(x, z)| x / z),
    );
    let t: Vec<DMatrix<f64>> = k
        .iter()
        .zip(&it.x)
        .zip(&res.rd)
        .zip(sinv)
        .map(|(((kb, x), rd), si)| kb - x * rd * si)
        .collect();
    let tl = kl - ratio.component_mul(&res.rdl);
    let h = &res.rp - d.apply_psd(&t) - &d.al * &tl;
    let (dy, dxf) = saddle.solve(&h, &res.rdf, &d.af);
    let ady = d.adjoint(&dy);
    let ds: Vec<DMatrix<f64>> = res.rd.iter().zip(ady).map(|(rd, a)| rd - a).collect();
    let dzl = &res.rdl - d.al.transpose() * &dy;
    let dx: Vec<DMatrix<f64>> = k
        .iter()
        .zip(&it.x)
        .zip(&ds)
        .zip(sinv)
        .map(|(((kb, x), dsb), si)| {
            let mut v = kb - x * dsb * si;
            symmetrize(&mut v);
            v
        })
        .collect();
    let dxl = kl - ratio.component_mul(&dzl);
    Direction {
        dx,
        dxf,
        dxl,
        dy,
        ds,
        dzl,
    }
}

/// Residual of the primal and free-variable equations for a direction.
fn linear_error(d: &Data, res: &Residuals, dir: &Direction) -> f64 {
    let rp = &res.rp - d.apply(&dir.dx, &dir.dxf, &dir.dxl);
    let rdf = &res.rdf - d.af.transpose() * &dir.dy;
    rp.amax().max(rdf.amax())
}

/// Newton direction with iterative refinement of the linear equations.
#[allow(clippy::too_many_arguments)]
fn refined_direction(
    d: &Data,
    it: &Iterate,
    res: &Residuals,
    sinv: &[DMatrix<f64>],
    saddle: &Saddle,
    k: &[DMatrix<f64>],
    kl: &DVector<f64>,
    rounds: usize,
) -> Direction {
    let mut dir = direction(d, it, res, sinv, saddle, k, kl);
    let zero_k: Vec<DMatrix<f64>> =
        it.x.iter()
            .map(|x| DMatrix::zeros(x.nrows(), x.ncols()))
            .collect();
    let zero_l = DVector::zeros(it.xl.len());
    for _ in 0..rounds {
        let rp = &res.rp - d.apply(&dir.dx, &dir.dxf, &dir.dxl);
        let rdf = &res.rdf - d.af.transpose() * &dir.dy;
        let scale = 1.0 + res.rp.amax() + res.rdf.amax();
        if rp.amax().max(rdf.amax()) <= 1e-15 * scale {
            break;
        }
        let sub = Residuals {
            rp,
            rd: zero_k.clone(),
            rdf,
            rdl: zero_l.clone(),
            pinf: 0.0,
            dinf: 0.0,
            pobj: 0.0,
            dobj: 0.0,
            gap: 0.0,
            mu: 0.0,
        };
        let corr = direction(d, it, &sub, sinv, saddle, &zero_k, &zero_l);
        for (a, b) in dir.dx.iter_mut().zip(&corr.dx) {
            *a += b;
        }
        for (a, b) in dir.ds.iter_mut().zip(&corr.ds) {
            *a += b;
        }
        dir.dxf += &corr.dxf;
        dir.dxl += &corr.dxl;
        dir.dy += &corr.dy;
        dir.dzl += &corr.dzl;
    }
    dir
}

fn step_lengths(it: &Iterate, dir: &Direction) -> (f64, f64) {
    let mut ap = max_step_vec(&it.xl, &dir.dxl);
    let mut ad = max_step_vec(&it.zl, &dir.dzl);
    for (x, dx) in it.x.iter().zip(&dir.dx) {
        ap = ap.min(max_step_psd(x, dx));
    }
    for (s, ds) in it.s.iter().zip(&dir.ds) {
        ad = ad.min(max_step_psd(s, ds));
    }
    (ap, ad)
}

/// Runs the interior-point method on a validated problem.
/// Result of one interior-point run. `solution` holds the best iterate;
/// `last_dual` is the final dual iterate, whose direction exposes a face when
/// the method stalls.
pub(super) struct Run {
    pub solution: SdpSolution,
    pub last_dual: Vec<f64>,
}

pub(super) fn interior_point(problem: &SdpProblem, settings: &SolverSettings) -> Run {
    let d = Data::new(problem);
    let nu = d.blocks.iter().map(|b| b.n).sum::<usize>() as f64 + d.al.ncols() as f64;
    let bnorm = d.rhs_norm();
    let cnorm = d.cost_norm();
    let mut it = initial_point(&d);
    let mut gamma = 0.9;
    let mut status = SolveStatus::Stalled;
    let mut ray = None;
    let mut iterations = 0;
    let mut res = residuals(&d, &it, nu, bnorm, cnorm);
    let mut best = f64::INFINITY;
    let mut idle = 0;
    // Best iterate seen, restored if the method stalls or breaks down.
    let mut kept: Option<(Iterate, Residuals, usize)> = None;

    loop {
        let converged =
            |r: &Residuals, tol: f64| r.pinf <= tol && r.dinf <= tol && r.gap <= tol && r.mu <= tol;
        debug!(
            "iter {iterations:3} p {:+.8e} d {:+.8e} gap {:.1e} pinf {:.1e} dinf {:.1e} mu {:.1e}",
            res.pobj, res.dobj, res.gap, res.pinf, res.dinf, res.mu
        );
        if converged(&res, settings.tol) {
            status = SolveStatus::Optimal;
            break;
        }
        if let Some(yr) = dual_ray(&d, &it.y, settings.ray_tol) {
            status = SolveStatus::Infeasible;
            ray = Some(yr);
            break;
        }
        if primal_ray(&d, &it, settings.ray_tol) {
            status = SolveStatus::Unbounded;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        let merit = res.pinf.max(res.dinf).max(res.gap);
        if merit < 0.9 * best {
            best = merit;
            idle = 0;
            kept = Some((it.clone(), res.clone(), iterations));
        } else {
            idle += 1;
            if idle >= STALL_ITERATIONS {
                break;
            }
        }
        let Some(sinv) = it.s.iter().map(inverse_spd).collect::<Option<Vec<_>>>() else {
            break;
        };
        let m = d.schur(&it.x, &sinv, &it.xl, &it.zl);
        let saddles = Saddle::candidates(m, &d.af);
        if saddles.is_empty() {
            break;
        }

        // Predictor: affine-scaling direction, which also picks the
        // factorization with the most accurate linear solve.
        let k0: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
        let kl0 = -&it.xl;
        let (saddle, pred) = saddles
            .iter()
            .map(|sd| {
                (
                    sd,
                    refined_direction(&d, &it, &res, &sinv, sd, &k0, &kl0, 2),
                )
            })
            .min_by(|a, b| linear_error(&d, &res, &a.1).total_cmp(&linear_error(&d, &res, &b.1)))
            .expect("nonempty");
        let (ap, ad) = step_lengths(&it, &pred);
        let ap = ap.min(ad).min(1.0);
        let ad = ap;
        let xs_aff: f64 =
            it.x.iter()
                .zip(&pred.dx)
                .zip(it.s.iter().zip(&pred.ds))
                .map(|((x, dx), (s, ds))| (x + dx * ap).dot(&(s + ds * ad)))
                .sum::<f64>()
                + (&it.xl + &pred.dxl * ap).dot(&(&it.zl + &pred.dzl * ad));
        let mu_aff = xs_aff / nu;
        let sigma = if res.mu > 0.0 {
            (mu_aff / res.mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };
        let target = sigma * res.mu;

        // Corrector with second-order term.
        let k1: Vec<DMatrix<f64>> =
            it.x.iter()
                .zip(&sinv)
                .zip(pred.dx.iter().zip(&pred.ds))
                .map(|((x, si), (dx, ds))| si * target - x - dx * ds * si)
                .collect();
        let kl1 = DVector::from_iterator(
            it.xl.len(),
            (0..it.xl.len()).map(|i| (target - pred.dxl[i] * pred.dzl[i]) / it.zl[i] - it.xl[i]),
        );
        let dir = refined_direction(&d, &it, &res, &sinv, saddle, &k1, &kl1, 2);
        let (ap, ad) = step_lengths(&it, &dir);
        let step = (gamma * ap.min(ad)).min(1.0);
        let (ap, ad) = (step, step);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        for (x, dx) in it.x.iter_mut().zip(&dir.dx) {
            *x += dx * ap;
            symmetrize(x);
        }
        it.xf += &dir.dxf * ap;
        it.xl += &dir.dxl * ap;
        it.y += &dir.dy * ad;
        for (s, ds) in it.s.iter_mut().zip(&dir.ds) {
            *s += ds * ad;
            symmetrize(s);
        }
        it.zl += &dir.dzl * ad;
        gamma = (0.9 + 0.09 * ap.min(ad)).min(0.99);
        iterations += 1;
        res = residuals(&d, &it, nu, bnorm, cnorm);
    }

    let last_dual = it.y.as_slice().to_vec();
    if status == SolveStatus::Stalled {
        if let Some((bit, bres, biter)) = kept {
            if bres.pinf.max(bres.dinf).max(bres.gap) < res.pinf.max(res.dinf).max(res.gap) {
                debug!("restoring iterate {biter}");
                it = bit;
                res = bres;
            }
        }
    }
    if status == SolveStatus::Stalled
        && res.pinf <= settings.near_tol
        && res.dinf <= settings.near_tol
        && res.gap <= settings.near_tol
    {
        status = SolveStatus::NearOptimal;
    }
    let (pobj, dobj) = match status {
        SolveStatus::Infeasible => (f64::INFINITY, f64::INFINITY),
        SolveStatus::Unbounded => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        _ => (res.pobj, res.dobj),
    };
    let dense = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
    let solution = SdpSolution {
        status,
        primal: PrimalPoint {
            blocks: it.x.iter().map(dense).collect(),
            block_sizes: problem.psd_blocks.clone(),
            free: it.xf.as_slice().to_vec(),
            nonneg: it.xl.as_slice().to_vec(),
        },
        dual: it.y.as_slice().to_vec(),
        slack: it.s.iter().map(dense).collect(),
        primal_objective: pobj,
        dual_objective: dobj,
        gap: res.gap,
        primal_infeasibility: res.pinf,
        dual_infeasibility: res.dinf,
        complementarity: res.mu,
        iterations,
        dual_ray: ray.map(|y| y.as_slice().to_vec()),
        reductions: 0,
    };
    Run {
        solution,
        last_dual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve, Row};

    fn row(entries: Vec<(Var, f64)>, rhs: f64) -> Row {
        Row { entries, rhs }
    }

    #[test]
    fn scalar_block() {
        let p = SdpProblem {
            psd_blocks: vec![1],
            rows: vec![row(vec![(Var::psd(0, 0, 0), 1.0)], 1.0)],
            objective: vec![(Var::psd(0, 0, 0), 1.0)],
            labels: vec!["x11".into()],
            ..Default::default()
        };
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.primal_objective - 1.0).abs() < 1e-7);
        assert!(s.gap <= 1e-8);
    }

    #[test]
    fn two_by_two_kkt() {
        let p = SdpProblem {
            psd_blocks: vec![2],
            rows: vec![
                row(vec![(Var::psd(0, 0, 1), 1.0)], 1.0),
                row(
                    vec![(Var::psd(0, 0, 0), 1.0), (Var::psd(0, 1, 1), 1.0)],
                    2.0,
                ),
            ],
            objective: vec![(Var::psd(0, 0, 0), 1.0)],
            labels: vec!["x12".into(), "trace".into()],
            ..Default::default()
        };
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.primal_objective - 1.0).abs() < 1e-7);
        assert!(s.gap <= 1e-8, "{s:?}");
        let x = s.primal.block_matrix(0);
        for v in x.iter() {
            assert!((v - 1.0).abs() < 1e-7, "{x}");
        }
    }

    #[test]
    fn negative_diagonal_is_infeasible() {
        let p = SdpProblem {
            psd_blocks: vec![1],
            rows: vec![row(vec![(Var::psd(0, 0, 0), 1.0)], -1.0)],
            objective: vec![(Var::psd(0, 0, 0), 1.0)],
            labels: vec!["x11".into()],
            ..Default::default()
        };
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        let y = s.dual_ray.unwrap();
        assert!((-y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn free_and_nonneg_variables() {
        // min t - u  s.t.  X11 + u = 2, X11 - t = 0, u - w = 1, w ≥ 0
        let p = SdpProblem {
            psd_blocks: vec![1],
            n_free: 2,
            n_nonneg: 1,
            rows: vec![
                row(vec![(Var::psd(0, 0, 0), 1.0), (Var::Free(1), 1.0)], 2.0),
                row(vec![(Var::psd(0, 0, 0), 1.0), (Var::Free(0), -1.0)], 0.0),
                row(vec![(Var::Free(1), 1.0), (Var::Nonneg(0), -1.0)], 1.0),
            ],
            objective: vec![(Var::Free(0), 1.0), (Var::Free(1), -1.0)],
            labels: vec!["a".into(), "b".into(), "c".into()],
        };
        // u = 2 - t, t ≥ 0, u ≥ 1 → t ∈ [0, 1], objective 2t - 2 → -2 at t = 0
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(
            (s.primal_objective + 2.0).abs() < 1e-7,
            "{}",
            s.primal_objective
        );
    }

    #[test]
    fn unbounded_detected() {
        // min -X11 with X11 - X22 = 0
        let p = SdpProblem {
            psd_blocks: vec![2],
            rows: vec![row(
                vec![(Var::psd(0, 0, 0), 1.0), (Var::psd(0, 1, 1), -1.0)],
                0.0,
            )],
            objective: vec![(Var::psd(0, 0, 0), -1.0)],
            labels: vec!["eq".into()],
            ..Default::default()
        };
        let s = solve(&p, 1e-8).unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }
}
