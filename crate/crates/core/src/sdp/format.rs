//! Line-oriented sparse text formats.
//!
//! Problem (`SDPTXT 1`):
//!
//! ```text
//! SDPTXT 1
//! blocks <k> <n_1> … <n_k>
//! free <n_free>
//! nonneg <n_nonneg>
//! vars <total>
//! rows <m>
//! rhs <row> <value> <label>
//! a <row> <var> <value>
//! c <var> <value>
//! end
//! ```
//!
//! Variables use the flat numbering of [`SdpProblem::var_index`]. Lines
//! starting with `#` are comments. Solutions (`SDPSOL 1`) list scalar
//! summaries followed by `x <var> <value>`, `s <var> <value>` (dual slack on
//! PSD entries), `y <row> <value>` and, for infeasible problems,
//! `ray <row> <value>`. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{PrimalPoint, Row, SdpError, SdpProblem, SdpSolution, SolveStatus, Var};

pub fn write_problem(p: &SdpProblem) -> String {
    let mut out = String::new();
    out.push_str("SDPTXT 1\n");
    let sizes: Vec<String> = p.psd_blocks.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(out, "blocks {} {}", p.psd_blocks.len(), sizes.join(" "));
    let _ = writeln!(out, "free {}", p.n_free);
    let _ = writeln!(out, "nonneg {}", p.n_nonneg);
    let _ = writeln!(out, "vars {}", p.n_vars());
    let _ = writeln!(out, "rows {}", p.n_rows());
    for (i, row) in p.rows.iter().enumerate() {
        let label = p
            .labels
            .get(i)
            .map(|s| s.replace('\n', " "))
            .unwrap_or_default();
        let _ = writeln!(out, "rhs {i} {} {label}", row.rhs);
    }
    for (i, row) in p.rows.iter().enumerate() {
        for &(v, c) in &row.entries {
            let _ = writeln!(out, "a {i} {} {c}", p.var_index(v));
        }
    }
    for &(v, c) in &p.objective {
        let _ = writeln!(out, "c {} {c}", p.var_index(v));
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn next_tokens(&mut self) -> Option<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Some(l.split_whitespace().collect());
        }
        None
    }

    fn err(&self, msg: impl Into<String>) -> SdpError {
        SdpError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn parse<T: FromStr>(&self, tok: Option<&&str>, what: &str) -> Result<T, SdpError> {
        tok.ok_or_else(|| self.err(format!("missing {what}")))?
            .parse()
            .map_err(|_| self.err(format!("bad {what}")))
    }

    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>, SdpError> {
        let toks = self
            .next_tokens()
            .ok_or_else(|| self.err(format!("expected `{key}`")))?;
        if toks[0] != key {
            return Err(self.err(format!("expected `{key}`, found `{}`", toks[0])));
        }
        Ok(toks)
    }

    fn count(&mut self, key: &str) -> Result<usize, SdpError> {
        let t = self.expect(key)?;
        self.parse(t.get(1), key)
    }
}

fn resolve(p: &SdpProblem, idx: usize, lines: &Lines) -> Result<Var, SdpError> {
    p.var_from_index(idx)
        .ok_or_else(|| lines.err(format!("variable {idx} out of range")))
}

pub fn read_problem(text: &str) -> Result<SdpProblem, SdpError> {
    let mut lines = Lines::new(text);
    let head = lines
        .next_tokens()
        .ok_or_else(|| lines.err("empty input"))?;
    if head != ["SDPTXT", "1"] {
        return Err(lines.err("expected header `SDPTXT 1`"));
    }
    let t = lines.expect("blocks")?;
    let k: usize = lines.parse(t.get(1), "block count")?;
    if t.len() != k + 2 {
        return Err(lines.err("block count does not match sizes"));
    }
    let psd_blocks = t[2..]
        .iter()
        .map(|s| lines.parse(Some(s), "block size"))
        .collect::<Result<Vec<usize>, _>>()?;
    let n_free = lines.count("free")?;
    let n_nonneg = lines.count("nonneg")?;
    let vars = lines.count("vars")?;
    let m = lines.count("rows")?;
    let mut p = SdpProblem {
        psd_blocks,
        n_free,
        n_nonneg,
        rows: vec![Row::default(); m],
        objective: Vec::new(),
        labels: vec![String::new(); m],
    };
    if p.n_vars() != vars {
        return Err(lines.err(format!(
            "vars {vars} inconsistent with blocks ({})",
            p.n_vars()
        )));
    }
    loop {
        let t = lines
            .next_tokens()
            .ok_or_else(|| lines.err("missing `end`"))?;
        match t[0] {
            "end" => break,
            "rhs" => {
                let i: usize = lines.parse(t.get(1), "row")?;
                if i >= m {
                    return Err(lines.err("row out of range"));
                }
                p.rows[i].rhs = lines.parse(t.get(2), "value")?;
                p.labels[i] = t[3.min(t.len())..].join(" ");
            }
            "a" => {
                let i: usize = lines.parse(t.get(1), "row")?;
                if i >= m {
                    return Err(lines.err("row out of range"));
                }
                let v = resolve(&p, lines.parse(t.get(2), "variable")?, &lines)?;
                let c: f64 = lines.parse(t.get(3), "value")?;
                p.rows[i].entries.push((v, c));
            }
            "c" => {
                let v = resolve(&p, lines.parse(t.get(1), "variable")?, &lines)?;
                let c: f64 = lines.parse(t.get(2), "value")?;
                p.objective.push((v, c));
            }
            other => return Err(lines.err(format!("unknown record `{other}`"))),
        }
    }
    p.validate()?;
    Ok(p)
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "Optimal",
        SolveStatus::NearOptimal => "NearOptimal",
        SolveStatus::Infeasible => "Infeasible",
        SolveStatus::Unbounded => "Unbounded",
        SolveStatus::Stalled => "Stalled",
    }
}

/// Writes a solution; variable ids follow `problem`'s numbering.
pub fn write_solution(problem: &SdpProblem, s: &SdpSolution) -> String {
    let mut out = String::new();
    out.push_str("SDPSOL 1\n");
    let _ = writeln!(out, "status {}", status_name(s.status));
    let _ = writeln!(out, "iterations {}", s.iterations);
    let _ = writeln!(out, "primal_objective {}", s.primal_objective);
    let _ = writeln!(out, "dual_objective {}", s.dual_objective);
    let _ = writeln!(out, "gap {}", s.gap);
    let _ = writeln!(out, "primal_infeasibility {}", s.primal_infeasibility);
    let _ = writeln!(out, "dual_infeasibility {}", s.dual_infeasibility);
    let _ = writeln!(out, "complementarity {}", s.complementarity);
    let _ = writeln!(out, "reductions {}", s.reductions);
    let _ = writeln!(out, "rows {}", s.dual.len());
    for idx in 0..problem.n_vars() {
        let v = problem.var_from_index(idx).expect("index in range");
        let _ = writeln!(out, "x {idx} {}", s.primal.get(v));
    }
    for idx in 0..problem.n_psd_vars() {
        if let Some(Var::Psd { block, row, col }) = problem.var_from_index(idx) {
            let n = problem.psd_blocks[block];
            let _ = writeln!(out, "s {idx} {}", s.slack[block][row * n + col]);
        }
    }
    for (i, y) in s.dual.iter().enumerate() {
        let _ = writeln!(out, "y {i} {y}");
    }
    if let Some(ray) = &s.dual_ray {
        for (i, y) in ray.iter().enumerate() {
            let _ = writeln!(out, "ray {i} {y}");
        }
    }
    out.push_str("end\n");
    out
}

/// Reads a solution written by [`write_solution`] for the same problem.
pub fn read_solution(problem: &SdpProblem, text: &str) -> Result<SdpSolution, SdpError> {
    let mut lines = Lines::new(text);
    let head = lines
        .next_tokens()
        .ok_or_else(|| lines.err("empty input"))?;
    if head != ["SDPSOL", "1"] {
        return Err(lines.err("expected header `SDPSOL 1`"));
    }
    let t = lines.expect("status")?;
    let status = match t.get(1).copied() {
        Some("Optimal") => SolveStatus::Optimal,
        Some("NearOptimal") => SolveStatus::NearOptimal,
        Some("Infeasible") => SolveStatus::Infeasible,
        Some("Unbounded") => SolveStatus::Unbounded,
        Some("Stalled") => SolveStatus::Stalled,
        _ => return Err(lines.err("unknown status")),
    };
    let iterations = lines.count("iterations")?;
    let scalar = |lines: &mut Lines, key: &str| -> Result<f64, SdpError> {
        let t = lines.expect(key)?;
        lines.parse(t.get(1), key)
    };
    let primal_objective = scalar(&mut lines, "primal_objective")?;
    let dual_objective = scalar(&mut lines, "dual_objective")?;
    let gap = scalar(&mut lines, "gap")?;
    let primal_infeasibility = scalar(&mut lines, "primal_infeasibility")?;
    let dual_infeasibility = scalar(&mut lines, "dual_infeasibility")?;
    let complementarity = scalar(&mut lines, "complementarity")?;
    let reductions = lines.count("reductions")?;
    let m = lines.count("rows")?;
    let sq = |n: usize| vec![0.0; n * n];
    let mut primal = PrimalPoint {
        blocks: problem.psd_blocks.iter().map(|&n| sq(n)).collect(),
        block_sizes: problem.psd_blocks.clone(),
        free: vec![0.0; problem.n_free],
        nonneg: vec![0.0; problem.n_nonneg],
    };
    let mut slack: Vec<Vec<f64>> = problem.psd_blocks.iter().map(|&n| sq(n)).collect();
    let mut dual = vec![0.0; m];
    let mut ray: Option<Vec<f64>> = None;
    loop {
        let t = lines
            .next_tokens()
            .ok_or_else(|| lines.err("missing `end`"))?;
        match t[0] {
            "end" => break,
            "x" | "s" => {
                let v = resolve(problem, lines.parse(t.get(1), "variable")?, &lines)?;
                let val: f64 = lines.parse(t.get(2), "value")?;
                match (t[0], v) {
                    ("x", Var::Psd { block, row, col }) | ("s", Var::Psd { block, row, col }) => {
                        let n = problem.psd_blocks[block];
                        let target = if t[0] == "x" {
                            &mut primal.blocks[block]
                        } else {
                            &mut slack[block]
                        };
                        target[row * n + col] = val;
                        target[col * n + row] = val;
                    }
                    ("x", Var::Free(i)) => primal.free[i] = val,
                    ("x", Var::Nonneg(i)) => primal.nonneg[i] = val,
                    _ => return Err(lines.err("slack on a non-PSD variable")),
                }
            }
            "y" | "ray" => {
                let i: usize = lines.parse(t.get(1), "row")?;
                if i >= m {
                    return Err(lines.err("row out of range"));
                }
                let val: f64 = lines.parse(t.get(2), "value")?;
                if t[0] == "y" {
                    dual[i] = val;
                } else {
                    ray.get_or_insert_with(|| vec![0.0; m])[i] = val;
                }
            }
            other => return Err(lines.err(format!("unknown record `{other}`"))),
        }
    }
    Ok(SdpSolution {
        status,
        primal,
        dual,
        slack,
        primal_objective,
        dual_objective,
        gap,
        primal_infeasibility,
        dual_infeasibility,
        complementarity,
        iterations,
        dual_ray: ray,
        reductions,
    })
}
