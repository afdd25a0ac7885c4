//! Block-diagonal semidefinite programs in primal standard form,
//!
//! ```text
//! minimize    Σ_b ⟨C_b, X_b⟩ + c_fᵀ x_f + c_lᵀ x_l
//! subject to  Σ_b ⟨A_ib, X_b⟩ + a_fiᵀ x_f + a_liᵀ x_l = b_i,
//!             X_b ⪰ 0,  x_l ≥ 0,  x_f free,
//! ```
//!
//! and a primal–dual interior-point solver for them.

mod format;
mod presolve;
mod solver;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{read_problem, read_solution, write_problem, write_solution};
pub use presolve::{solve, solve_with};
pub use solver::SolverSettings;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One scalar decision variable. PSD entries are addressed by their upper
/// triangle (`row ≤ col`); a linear coefficient on such an entry multiplies
/// `X[row, col]` once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    Psd {
        block: usize,
        row: usize,
        col: usize,
    },
    Free(usize),
    Nonneg(usize),
}

impl Var {
    pub fn psd(block: usize, a: usize, b: usize) -> Var {
        Var::Psd {
            block,
            row: a.min(b),
            col: a.max(b),
        }
    }
}

/// A sparse linear form with a right-hand side.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Row {
    pub entries: Vec<(Var, f64)>,
    pub rhs: f64,
}

impl Row {
    /// Merges duplicate variables and drops exact zeros.
    pub fn canonicalize(&mut self) {
        let mut acc: BTreeMap<Var, f64> = BTreeMap::new();
        for (v, c) in self.entries.drain(..) {
            *acc.entry(v).or_insert(0.0) += c;
        }
        self.entries = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, (_, c)| m.max(c.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SdpProblem {
    pub psd_blocks: Vec<usize>,
    pub n_free: usize,
    pub n_nonneg: usize,
    pub rows: Vec<Row>,
    pub objective: Vec<(Var, f64)>,
    /// Free-text origin of each row.
    pub labels: Vec<String>,
}

impl SdpProblem {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_psd_vars(&self) -> usize {
        self.psd_blocks.iter().map(|n| n * (n + 1) / 2).sum()
    }

    pub fn n_vars(&self) -> usize {
        self.n_psd_vars() + self.n_free + self.n_nonneg
    }

    /// Flat index: PSD upper triangles block by block (column-major,
    /// `row ≤ col`), then free, then nonnegative variables.
    pub fn var_index(&self, v: Var) -> usize {
        match v {
            Var::Psd { block, row, col } => {
                let off: usize = self.psd_blocks[..block]
                    .iter()
                    .map(|n| n * (n + 1) / 2)
                    .sum();
                off + col * (col + 1) / 2 + row
            }
            Var::Free(i) => self.n_psd_vars() + i,
            Var::Nonneg(i) => self.n_psd_vars() + self.n_free + i,
        }
    }

    pub fn var_from_index(&self, mut idx: usize) -> Option<Var> {
        for (block, &n) in self.psd_blocks.iter().enumerate() {
            let len = n * (n + 1) / 2;
            if idx < len {
                let mut col = 0;
                while (col + 1) * (col + 2) / 2 <= idx {
                    col += 1;
                }
                return Some(Var::Psd {
                    block,
                    row: idx - col * (col + 1) / 2,
                    col,
                });
            }
            idx -= len;
        }
        if idx < self.n_free {
            return Some(Var::Free(idx));
        }
        idx -= self.n_free;
        (idx < self.n_nonneg).then_some(Var::Nonneg(idx))
    }

    /// Checks indices, label count and symmetric addressing.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.labels.len() != self.rows.len() {
            return Err(SdpError::Malformed(format!(
                "{} labels for {} rows",
                self.labels.len(),
                self.rows.len()
            )));
        }
        let check = |v: &Var| -> Result<(), SdpError> {
            let ok = match *v {
                Var::Psd { block, row, col } => {
                    block < self.psd_blocks.len() && row <= col && col < self.psd_blocks[block]
                }
                Var::Free(i) => i < self.n_free,
                Var::Nonneg(i) => i < self.n_nonneg,
            };
            if ok {
                Ok(())
            } else {
                Err(SdpError::Malformed(format!("variable {v:?} out of range")))
            }
        };
        for row in &self.rows {
            for (v, c) in &row.entries {
                check(v)?;
                if !c.is_finite() {
                    return Err(SdpError::Malformed("non-finite coefficient".into()));
                }
            }
            if !row.rhs.is_finite() {
                return Err(SdpError::Malformed("non-finite right-hand side".into()));
            }
        }
        for (v, _) in &self.objective {
            check(v)?;
        }
        Ok(())
    }

    /// Value of a linear form at a primal point.
    pub fn eval_form(entries: &[(Var, f64)], x: &PrimalPoint) -> f64 {
        entries.iter().map(|(v, c)| c * x.get(*v)).sum()
    }
}

/// Primal variable values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPoint {
    /// Dense symmetric blocks, row-major.
    pub blocks: Vec<Vec<f64>>,
    pub block_sizes: Vec<usize>,
    pub free: Vec<f64>,
    pub nonneg: Vec<f64>,
}

impl PrimalPoint {
    pub fn get(&self, v: Var) -> f64 {
        match v {
            Var::Psd { block, row, col } => self.blocks[block][row * self.block_sizes[block] + col],
            Var::Free(i) => self.free[i],
            Var::Nonneg(i) => self.nonneg[i],
        }
    }

    pub fn block_matrix(&self, b: usize) -> nalgebra::DMatrix<f64> {
        let n = self.block_sizes[b];
        nalgebra::DMatrix::from_row_slice(n, n, &self.blocks[b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    Stalled,
}

impl SolveStatus {
    pub fn is_solved(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal: PrimalPoint,
    /// Dual multipliers `y`, one per row.
    pub dual: Vec<f64>,
    /// Dual slack blocks `S = C − Σ yᵢ Aᵢ`, row-major.
    pub slack: Vec<Vec<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|p − d| / (1 + |p| + |d|)`.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// Average complementarity `(Σ⟨X,S⟩ + xᵀz) / N`.
    pub complementarity: f64,
    pub iterations: usize,
    /// Farkas ray `y` with `bᵀy = 1`, `−Aᵀy ⪰ 0` when `status = Infeasible`.
    pub dual_ray: Option<Vec<f64>>,
    /// Facial reductions applied after stalls. When nonzero, `dual`,
    /// `dual_infeasibility` and `complementarity` refer to the reduced
    /// problem and `slack` may be indefinite off the face.
    #[serde(default)]
    pub reductions: usize,
}
