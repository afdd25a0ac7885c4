//! Facial reduction and row pruning around the interior-point core.
//!
//! A problem whose feasible set has no interior point makes the Newton
//! systems degenerate and limits the attainable gap to roughly the square
//! root of the residual. Before solving, diagonal entries and nonnegative
//! variables forced to zero by a row with zero right-hand side are removed.
//! If the solver then stalls with a diverging dual iterate, the normalized
//! iterate is refined to an exact reducing certificate `ŷ` (`−Aᵀŷ ⪰ 0`,
//! `bᵀŷ = 0`) and the problem is restricted to the face it exposes.

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::solver::{interior_point, SolverSettings};
use super::{PrimalPoint, Row, SdpError, SdpProblem, SdpSolution, SolveStatus, Var};

const MAX_REDUCTIONS: usize = 4;
/// Squared relative residual below which a row is treated as dependent.
const DEPENDENT_ROW: f64 = 1e-14;
const MAX_CERTIFICATE_ENTRIES: usize = 4_000_000;

/// Solves to relative gap `tol` with default settings otherwise.
pub fn solve(problem: &SdpProblem, tol: f64) -> Result<SdpSolution, SdpError> {
    solve_with(problem, &SolverSettings::with_tol(tol))
}

pub fn solve_with(
    problem: &SdpProblem,
    settings: &SolverSettings,
) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let mut face = Face::full(problem);
    let mut fallback: Option<SdpSolution> = None;
    for _ in 0..problem.n_vars() {
        let reduced = face.restrict(problem);
        if !face.diagonal_pass(&reduced) {
            break;
        }
    }
    loop {
        let reduced = face.restrict(problem);
        let (kept, conflict) = independent_rows(&reduced);
        if let Some(ray) = conflict {
            let ray_full = face.lift_rows(&ray);
            return Ok(face.infeasible(problem, ray_full));
        }
        face.rows = kept.iter().map(|&i| face.rows[i]).collect();
        let reduced = face.restrict(problem);
        let run = interior_point(&reduced, settings);
        let raw = run.solution;
        debug!(
            "face {}: status {:?} after {} iterations, gap {:.1e}",
            face.reductions, raw.status, raw.iterations, raw.gap
        );
        let done = matches!(
            raw.status,
            SolveStatus::Optimal | SolveStatus::Infeasible | SolveStatus::Unbounded
        );
        let lifted = face.lift(problem, &reduced, raw, settings);
        if done {
            return Ok(lifted);
        }
        // A reduced face can solve worse than the face it came from.
        if fallback.as_ref().is_none_or(|f| better(&lifted, f)) {
            fallback = Some(lifted);
        }
        if face.reductions >= MAX_REDUCTIONS || !face.reduce_from_dual(&reduced, &run.last_dual) {
            return Ok(fallback.expect("set above"));
        }
    }
}

/// Orders unfinished solutions by status, then by worst residual.
fn better(a: &SdpSolution, b: &SdpSolution) -> bool {
    let rank = |s: &SdpSolution| match s.status {
        SolveStatus::Optimal => 0,
        SolveStatus::NearOptimal => 1,
        _ => 2,
    };
    let merit = |s: &SdpSolution| s.primal_infeasibility.max(s.dual_infeasibility).max(s.gap);
    (rank(a), merit(a)) < (rank(b), merit(b))
}

/// Current face: a basis per PSD block, surviving nonnegative variables and
/// surviving rows, all in terms of the original problem.
struct Face {
    bases: Vec<DMatrix<f64>>,
    nonneg: Vec<usize>,
    rows: Vec<usize>,
    reductions: usize,
}

/// How an original block's entries map into a reduced block.
enum Map {
    Gone,
    Select(usize, Vec<Option<usize>>),
    Dense(usize),
}

impl Face {
    fn full(p: &SdpProblem) -> Face {
        Face {
            bases: p
                .psd_blocks
                .iter()
                .map(|&n| DMatrix::identity(n, n))
                .collect(),
            nonneg: (0..p.n_nonneg).collect(),
            rows: (0..p.n_rows()).collect(),
            reductions: 0,
        }
    }

    fn block_maps(&self) -> Vec<Map> {
        let mut next = 0;
        self.bases
            .iter()
            .map(|v| {
                if v.ncols() == 0 {
                    return Map::Gone;
                }
                let idx = next;
                next += 1;
                let mut sel = vec![None; v.nrows()];
                let is_selection = v.column_iter().enumerate().all(|(j, col)| {
                    let nz: Vec<usize> = (0..col.len()).filter(|&i| col[i] != 0.0).collect();
                    if nz.len() == 1 && col[nz[0]] == 1.0 && sel[nz[0]].is_none() {
                        sel[nz[0]] = Some(j);
                        true
                    } else {
                        false
                    }
                });
                if is_selection {
                    Map::Select(idx, sel)
                } else {
                    Map::Dense(idx)
                }
            })
            .collect()
    }

    fn map_form(&self, maps: &[Map], entries: &[(Var, f64)]) -> Vec<(Var, f64)> {
        let nonneg_pos = |j: usize| self.nonneg.binary_search(&j).ok();
        let mut out: Vec<(Var, f64)> = Vec::new();
        let mut dense: Vec<Option<DMatrix<f64>>> = self.bases.iter().map(|_| None).collect();
        for &(v, c) in entries {
            match v {
                Var::Free(_) => out.push((v, c)),
                Var::Nonneg(j) => {
                    if let Some(k) = nonneg_pos(j) {
                        out.push((Var::Nonneg(k), c));
                    }
                }
                Var::Psd { block, row, col } => match &maps[block] {
                    Map::Gone => {}
                    Map::Select(idx, sel) => {
                        if let (Some(a), Some(b)) = (sel[row], sel[col]) {
                            out.push((Var::psd(*idx, a, b), c));
                        }
                    }
                    Map::Dense(_) => {
                        let v = &self.bases[block];
                        let r = v.ncols();
                        let m = dense[block].get_or_insert_with(|| DMatrix::zeros(r, r));
                        let vr = v.row(row).transpose();
                        let vc = v.row(col).transpose();
                        if row == col {
                            m.ger(c, &vr, &vr, 1.0);
                        } else {
                            m.ger(0.5 * c, &vr, &vc, 1.0);
                            m.ger(0.5 * c, &vc, &vr, 1.0);
                        }
                    }
                },
            }
        }
        for (block, m) in dense.into_iter().enumerate() {
            let (Some(m), Map::Dense(idx)) = (m, &maps[block]) else {
                continue;
            };
            let scale = m.amax();
            for q in 0..m.ncols() {
                for p in 0..=q {
                    let coef = if p == q {
                        m[(p, p)]
                    } else {
                        m[(p, q)] + m[(q, p)]
                    };
                    if coef.abs() > 1e-14 * scale {
                        out.push((Var::psd(*idx, p, q), coef));
                    }
                }
            }
        }
        out
    }

    fn restrict(&self, p: &SdpProblem) -> SdpProblem {
        let maps = self.block_maps();
        let rows = self
            .rows
            .iter()
            .map(|&i| {
                let mut row = Row {
                    entries: self.map_form(&maps, &p.rows[i].entries),
                    rhs: p.rows[i].rhs,
                };
                row.canonicalize();
                row
            })
            .collect();
        let mut obj = Row {
            entries: self.map_form(&maps, &p.objective),
            rhs: 0.0,
        };
        obj.canonicalize();
        SdpProblem {
            psd_blocks: self
                .bases
                .iter()
                .map(|v| v.ncols())
                .filter(|&r| r > 0)
                .collect(),
            n_free: p.n_free,
            n_nonneg: self.nonneg.len(),
            rows,
            objective: obj.entries,
            labels: self.rows.iter().map(|&i| p.labels[i].clone()).collect(),
        }
    }

    /// Original block index of each reduced block.
    fn reduced_to_original(&self) -> Vec<usize> {
        (0..self.bases.len())
            .filter(|&b| self.bases[b].ncols() > 0)
            .collect()
    }

    /// Restricts reduced block `rb` to the column span of `keep` (in reduced
    /// coordinates) and the nonnegative variables to `nonneg_keep`.
    fn compose(&mut self, new_bases: Vec<DMatrix<f64>>, nonneg_keep: Vec<usize>) {
        for (rb, ob) in self.reduced_to_original().into_iter().enumerate() {
            self.bases[ob] = &self.bases[ob] * &new_bases[rb];
        }
        self.nonneg = nonneg_keep.into_iter().map(|k| self.nonneg[k]).collect();
    }

    /// Removes diagonal entries and nonnegative variables fixed at zero by
    /// a single row. Returns whether anything changed.
    fn diagonal_pass(&mut self, reduced: &SdpProblem) -> bool {
        let mut dead: Vec<Vec<bool>> = reduced.psd_blocks.iter().map(|&n| vec![false; n]).collect();
        let mut dead_nonneg = vec![false; reduced.n_nonneg];
        let mut changed = false;
        for row in &reduced.rows {
            if row.entries.is_empty() || row.rhs.abs() > 1e-14 * row.max_abs() {
                continue;
            }
            let sign = row.entries[0].1.signum();
            let eligible = row.entries.iter().all(|&(v, c)| {
                c.signum() == sign
                    && match v {
                        Var::Psd { row, col, .. } => row == col,
                        Var::Nonneg(_) => true,
                        Var::Free(_) => false,
                    }
            });
            if !eligible {
                continue;
            }
            for &(v, _) in &row.entries {
                match v {
                    Var::Psd { block, row, .. } => dead[block][row] = true,
                    Var::Nonneg(j) => dead_nonneg[j] = true,
                    Var::Free(_) => {}
                }
                changed = true;
            }
        }
        if !changed {
            return false;
        }
        let bases = dead
            .iter()
            .map(|d| {
                let keep: Vec<usize> = (0..d.len()).filter(|&i| !d[i]).collect();
                DMatrix::from_fn(
                    d.len(),
                    keep.len(),
                    |i, j| if keep[j] == i { 1.0 } else { 0.0 },
                )
            })
            .collect();
        let nonneg_keep = (0..dead_nonneg.len())
            .filter(|&j| !dead_nonneg[j])
            .collect();
        self.compose(bases, nonneg_keep);
        debug!(
            "diagonal reduction: blocks {:?}",
            self.bases.iter().map(|v| v.ncols()).collect::<Vec<_>>()
        );
        true
    }

    /// Tries to turn a diverging dual iterate into a reducing certificate.
    fn reduce_from_dual(&mut self, reduced: &SdpProblem, y: &[f64]) -> bool {
        let Some((bases, nonneg_keep)) = certificate_face(reduced, y) else {
            return false;
        };
        self.compose(bases, nonneg_keep);
        self.reductions += 1;
        debug!(
            "facial reduction {}: blocks {:?}",
            self.reductions,
            self.bases.iter().map(|v| v.ncols()).collect::<Vec<_>>()
        );
        true
    }

    fn lift_rows(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.iter().max().map_or(0, |m| m + 1)];
        for (k, &i) in self.rows.iter().enumerate() {
            out[i] = y[k];
        }
        out
    }

    fn infeasible(&self, p: &SdpProblem, ray: Vec<f64>) -> SdpSolution {
        let mut ray = ray;
        ray.resize(p.n_rows(), 0.0);
        let zero = |n: usize| vec![0.0; n * n];
        SdpSolution {
            status: SolveStatus::Infeasible,
            primal: PrimalPoint {
                blocks: p.psd_blocks.iter().map(|&n| zero(n)).collect(),
                block_sizes: p.psd_blocks.clone(),
                free: vec![0.0; p.n_free],
                nonneg: vec![0.0; p.n_nonneg],
            },
            dual: vec![0.0; p.n_rows()],
            slack: p.psd_blocks.iter().map(|&n| zero(n)).collect(),
            primal_objective: f64::INFINITY,
            dual_objective: f64::INFINITY,
            gap: 0.0,
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: 0.0,
            complementarity: 0.0,
            iterations: 0,
            dual_ray: Some(ray),
            reductions: self.reductions,
        }
    }

    /// Maps a solution of the reduced problem back and re-measures the
    /// primal side on the original rows.
    fn lift(
        &self,
        p: &SdpProblem,
        reduced: &SdpProblem,
        raw: SdpSolution,
        settings: &SolverSettings,
    ) -> SdpSolution {
        let to_orig = self.reduced_to_original();
        let mut blocks: Vec<Vec<f64>> = p.psd_blocks.iter().map(|&n| vec![0.0; n * n]).collect();
        for (rb, &ob) in to_orig.iter().enumerate() {
            let w = raw.primal.block_matrix(rb);
            let v = &self.bases[ob];
            let x = v * w * v.transpose();
            blocks[ob] = x.transpose().as_slice().to_vec();
        }
        let mut nonneg = vec![0.0; p.n_nonneg];
        for (k, &j) in self.nonneg.iter().enumerate() {
            nonneg[j] = raw.primal.nonneg[k];
        }
        let primal = PrimalPoint {
            blocks,
            block_sizes: p.psd_blocks.clone(),
            free: raw.primal.free.clone(),
            nonneg,
        };
        let mut dual = self.lift_rows(&raw.dual);
        dual.resize(p.n_rows(), 0.0);
        let dual_ray = raw.dual_ray.as_ref().map(|r| {
            let mut l = self.lift_rows(r);
            l.resize(p.n_rows(), 0.0);
            l
        });
        let mut slack: Vec<DMatrix<f64>> =
            p.psd_blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for &(v, c) in &p.objective {
            if let Var::Psd { block, row, col } = v {
                add_sym(&mut slack[block], row, col, c);
            }
        }
        for (row, &yi) in p.rows.iter().zip(&dual) {
            for &(v, c) in &row.entries {
                if let Var::Psd { block, row, col } = v {
                    add_sym(&mut slack[block], row, col, -yi * c);
                }
            }
        }
        let slack = slack
            .iter()
            .map(|m| m.transpose().as_slice().to_vec())
            .collect();

        let bnorm = p.rows.iter().map(|r| r.rhs * r.rhs).sum::<f64>().sqrt();
        let rp = p
            .rows
            .iter()
            .map(|r| r.rhs - SdpProblem::eval_form(&r.entries, &primal))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let pinf = rp / (1.0 + bnorm);
        let mut status = raw.status;
        let (mut pobj, mut dobj, mut gap) = (raw.primal_objective, raw.dual_objective, raw.gap);
        if matches!(
            status,
            SolveStatus::Optimal | SolveStatus::NearOptimal | SolveStatus::Stalled
        ) {
            pobj = SdpProblem::eval_form(&p.objective, &primal);
            dobj = p.rows.iter().zip(&dual).map(|(r, y)| r.rhs * y).sum();
            gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let ok = |t: f64| pinf <= t && gap <= t && raw.dual_infeasibility <= t;
            status = if ok(settings.tol) && raw.complementarity <= settings.tol {
                SolveStatus::Optimal
            } else if ok(settings.near_tol) {
                SolveStatus::NearOptimal
            } else {
                SolveStatus::Stalled
            };
        }
        let _ = reduced;
        SdpSolution {
            status,
            primal,
            dual,
            slack,
            primal_objective: pobj,
            dual_objective: dobj,
            gap,
            primal_infeasibility: if raw.status == SolveStatus::Infeasible {
                raw.primal_infeasibility
            } else {
                pinf
            },
            dual_infeasibility: raw.dual_infeasibility,
            complementarity: raw.complementarity,
            iterations: raw.iterations,
            dual_ray,
            reductions: self.reductions,
        }
    }
}

fn add_sym(m: &mut DMatrix<f64>, r: usize, c: usize, v: f64) {
    if r == c {
        m[(r, r)] += v;
    } else {
        m[(r, c)] += 0.5 * v;
        m[(c, r)] += 0.5 * v;
    }
}

/// Greedy selection of linearly independent rows in order. A dependent row
/// with an inconsistent right-hand side yields a Farkas ray `y` with
/// `Aᵀy ≈ 0`, `bᵀy = 1`.
fn independent_rows(p: &SdpProblem) -> (Vec<usize>, Option<Vec<f64>>) {
    let m = p.n_rows();
    let mut by_var: std::collections::HashMap<Var, Vec<(usize, f64)>> =
        std::collections::HashMap::new();
    for (i, row) in p.rows.iter().enumerate() {
        for &(v, c) in &row.entries {
            by_var.entry(v).or_default().push((i, c));
        }
    }
    let mut gram: Vec<std::collections::HashMap<usize, f64>> = vec![Default::default(); m];
    for list in by_var.values() {
        for &(i, a) in list {
            for &(j, b) in list {
                *gram[i].entry(j).or_insert(0.0) += a * b;
            }
        }
    }
    let mut chosen: Vec<usize> = Vec::new();
    // Rows of the lower Cholesky factor of the chosen Gram submatrix.
    let mut l: Vec<Vec<f64>> = Vec::new();
    for j in 0..m {
        let gjj = gram[j].get(&j).copied().unwrap_or(0.0);
        let g: Vec<f64> = chosen
            .iter()
            .map(|&i| gram[j].get(&i).copied().unwrap_or(0.0))
            .collect();
        let mut z = vec![0.0; chosen.len()];
        for k in 0..chosen.len() {
            let s: f64 = (0..k).map(|t| l[k][t] * z[t]).sum();
            z[k] = (g[k] - s) / l[k][k];
        }
        let resid = gjj - z.iter().map(|v| v * v).sum::<f64>();
        let rhs_scale = 1.0 + p.rows[j].rhs.abs();
        if gjj > 0.0 && resid > DEPENDENT_ROW * gjj {
            let mut row = z;
            row.push(resid.sqrt());
            l.push(row);
            chosen.push(j);
            continue;
        }
        // Dependent: c = L⁻ᵀ z gives a_j ≈ Σ c_k a_{chosen_k}.
        let n = chosen.len();
        let mut c = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|t| l[t][k] * c[t]).sum();
            c[k] = (z[k] - s) / l[k][k];
        }
        let implied: f64 = c
            .iter()
            .zip(&chosen)
            .map(|(ck, &i)| ck * p.rows[i].rhs)
            .sum();
        let mismatch = p.rows[j].rhs - implied;
        let scale = rhs_scale
            + c.iter()
                .zip(&chosen)
                .map(|(ck, &i)| (ck * p.rows[i].rhs).abs())
                .sum::<f64>();
        if mismatch.abs() > 1e-9 * scale {
            let mut ray = vec![0.0; m];
            ray[j] = 1.0 / mismatch;
            for (ck, &i) in c.iter().zip(&chosen) {
                ray[i] = -ck / mismatch;
            }
            return (chosen, Some(ray));
        }
    }
    (chosen, None)
}

fn adjoint_dense(
    p: &SdpProblem,
    y: &DVector<f64>,
) -> (Vec<DMatrix<f64>>, DVector<f64>, DVector<f64>) {
    let mut blocks: Vec<DMatrix<f64>> =
        p.psd_blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut free = DVector::zeros(p.n_free);
    let mut nonneg = DVector::zeros(p.n_nonneg);
    for (row, &yi) in p.rows.iter().zip(y.iter()) {
        for &(v, c) in &row.entries {
            match v {
                Var::Psd { block, row, col } => add_sym(&mut blocks[block], row, col, yi * c),
                Var::Free(j) => free[j] += yi * c,
                Var::Nonneg(j) => nonneg[j] += yi * c,
            }
        }
    }
    (blocks, free, nonneg)
}

/// From an approximate certificate direction, solves for an exact one on
/// the numerically identified face and returns the exposed face.
fn certificate_face(p: &SdpProblem, y: &[f64]) -> Option<(Vec<DMatrix<f64>>, Vec<usize>)> {
    let m = p.n_rows();
    let y = DVector::from_column_slice(y);
    let norm = y.norm();
    if m == 0 || norm == 0.0 {
        return None;
    }
    let yhat = &y / norm;
    let (a, _, al) = adjoint_dense(p, &yhat);
    let z: Vec<DMatrix<f64>> = a.iter().map(|m| -m).collect();
    let zl = -al;
    let eigs: Vec<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>> =
        z.iter().map(|m| m.clone().symmetric_eigen()).collect();
    let scale = eigs
        .iter()
        .map(|e| e.eigenvalues.amax())
        .fold(zl.iter().fold(0.0f64, |s, v| s.max(v.abs())), f64::max);
    if scale < 1e-12 {
        return None;
    }
    let thr = 1e-3 * scale;
    // Homogeneous equations E ŷ = 0.
    let mut eqs: Vec<DVector<f64>> = Vec::new();
    let unit = |i: usize| {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        e
    };
    let adjoint_of = |i: usize| adjoint_dense(p, &unit(i));
    let per_row: Vec<_> = (0..m).map(adjoint_of).collect();
    let mut entries = 0;
    for (b, e) in eigs.iter().enumerate() {
        let null: Vec<usize> = (0..e.eigenvalues.len())
            .filter(|&k| e.eigenvalues[k] <= thr)
            .collect();
        entries += null.len() * p.psd_blocks[b] * m;
        if entries > MAX_CERTIFICATE_ENTRIES {
            return None;
        }
        for &k in &null {
            let v = e.eigenvectors.column(k);
            for r in 0..p.psd_blocks[b] {
                eqs.push(DVector::from_iterator(
                    m,
                    per_row.iter().map(|(ab, _, _)| (ab[b].row(r) * v)[0]),
                ));
            }
        }
    }
    for j in 0..p.n_free {
        eqs.push(DVector::from_iterator(
            m,
            per_row.iter().map(|(_, f, _)| f[j]),
        ));
    }
    for j in 0..p.n_nonneg {
        if zl[j] <= thr {
            eqs.push(DVector::from_iterator(
                m,
                per_row.iter().map(|(_, _, l)| l[j]),
            ));
        }
    }
    eqs.push(DVector::from_iterator(m, p.rows.iter().map(|r| r.rhs)));
    let rows = eqs.len().max(m);
    let mut e = DMatrix::zeros(rows, m);
    for (i, q) in eqs.iter().enumerate() {
        e.row_mut(i).copy_from(&q.transpose());
    }
    let svd = e.svd(false, true);
    let vt = svd.v_t?;
    let smax = svd.singular_values.amax().max(1e-300);
    let mut ystar = DVector::zeros(m);
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= 1e-10 * smax {
            let v = vt.row(k).transpose();
            ystar += &v * v.dot(&yhat);
        }
    }
    if ystar.norm() < 0.5 {
        return None;
    }
    ystar /= ystar.norm();
    let (a, _, al) = adjoint_dense(p, &ystar);
    let zl = -al;
    let mut bases = Vec::new();
    let mut reduced = false;
    let eigs: Vec<_> = a.iter().map(|m| (-m).symmetric_eigen()).collect();
    let scale = eigs
        .iter()
        .map(|e| e.eigenvalues.amax())
        .fold(zl.amax(), f64::max);
    for e in &eigs {
        if e.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
            return None;
        }
        let keep: Vec<usize> = (0..e.eigenvalues.len())
            .filter(|&k| e.eigenvalues[k] <= 1e-9 * scale)
            .collect();
        reduced |= keep.len() < e.eigenvalues.len();
        bases.push(e.eigenvectors.select_columns(&keep));
    }
    if zl.iter().any(|&v| v < -1e-10 * scale) {
        return None;
    }
    let nonneg_keep: Vec<usize> = (0..p.n_nonneg).filter(|&j| zl[j] <= 1e-9 * scale).collect();
    reduced |= nonneg_keep.len() < p.n_nonneg;
    reduced.then_some((bases, nonneg_keep))
}
