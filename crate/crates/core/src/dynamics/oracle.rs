use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrate::{simulate, RunOptions, TailModel};
use super::{local_stability, DynamicsError, LocalStability, OracleConfig, Terminal, VectorField};

/// Empirical region-of-attraction membership. Simulation can only
/// semi-decide membership, so `Undetermined` is never coerced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Converged,
    Diverged,
    Undetermined,
}

impl From<Terminal> for Membership {
    fn from(t: Terminal) -> Self {
        match t {
            Terminal::EnteredBall => Membership::Converged,
            Terminal::Escaped => Membership::Diverged,
            Terminal::TimedOut => Membership::Undetermined,
        }
    }
}

/// An oracle value with a bracket. For converged points the bracket width is
/// the tail bound; for undetermined points it runs up to the trivial bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub membership: Membership,
}

impl OracleValue {
    fn exact(v: f64, membership: Membership) -> Self {
        OracleValue {
            value: v,
            lower: v,
            upper: v,
            membership,
        }
    }

    pub fn is_bracketed(&self) -> bool {
        self.upper > self.lower
    }
}

/// All per-point oracle outputs from one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub point: Vec<f64>,
    pub membership: Membership,
    pub w: OracleValue,
    pub v: OracleValue,
    /// `F_η(x)`; `None` stands for `+∞`.
    pub entry_time: Option<f64>,
}

/// Oracles bound to one vector field, with the linearization checked once.
#[derive(Debug, Clone)]
pub struct Oracle {
    field: VectorField,
    cfg: OracleConfig,
    stability: LocalStability,
    tail: Option<TailModel>,
}

impl Oracle {
    /// Fails when the linearization is not Hurwitz (unless the config allows
    /// it) or when `η` lies outside the sampled quadratic basin.
    pub fn new(field: &VectorField, cfg: &OracleConfig) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        let stability = local_stability(field, cfg.escape_radius);
        let mut tail = None;
        if stability.hurwitz {
            let basin = stability.eta_estimate.unwrap_or(0.0);
            if cfg.eta > basin {
                return Err(DynamicsError::EtaOutsideBasin {
                    eta: cfg.eta,
                    basin,
                });
            }
            tail = Some(TailModel {
                mu: stability.mu.expect("set when Hurwitz"),
                delta: stability.delta.expect("set when Hurwitz"),
            });
        } else if !cfg.allow_non_hurwitz {
            return Err(DynamicsError::NotHurwitz {
                max_real_part: stability.max_real_part(),
            });
        }
        Ok(Oracle {
            field: field.clone(),
            cfg: cfg.clone(),
            stability,
            tail,
        })
    }

    pub fn stability(&self) -> &LocalStability {
        &self.stability
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn classify(&self, x0: &[f64]) -> Result<Membership, DynamicsError> {
        let opts = RunOptions {
            horizon: self.cfg.t_max,
            events: true,
            beta: 1,
            tail: None,
        };
        let run = simulate(&self.field, x0, &self.cfg, &opts)?;
        Ok(run.trajectory.terminal.into())
    }

    pub fn entry_time(&self, x0: &[f64]) -> Result<Option<f64>, DynamicsError> {
        let opts = RunOptions {
            horizon: self.cfg.t_max,
            events: true,
            beta: 1,
            tail: None,
        };
        let run = simulate(&self.field, x0, &self.cfg, &opts)?;
        Ok(run.entry.map(|e| e.0))
    }

    /// Membership, `W_{λ,β}`, `V_β` and `F_η` from a single simulation.
    pub fn evaluate(&self, x0: &[f64], lambda: f64, beta: u32) -> Result<OracleRow, DynamicsError> {
        let opts = RunOptions {
            horizon: self.cfg.t_max,
            events: true,
            beta,
            tail: self.tail,
        };
        let run = simulate(&self.field, x0, &self.cfg, &opts)?;
        let membership: Membership = run.trajectory.terminal.into();
        let q = run.integral;
        let w_of = |v: f64| -(-lambda * v).exp_m1();
        let (v, w) = match membership {
            Membership::Converged => match run.tail {
                Some(t) => (
                    OracleValue {
                        value: q,
                        lower: q,
                        upper: q + t,
                        membership,
                    },
                    OracleValue {
                        value: w_of(q),
                        lower: w_of(q),
                        upper: w_of(q + t),
                        membership,
                    },
                ),
                None => (
                    OracleValue {
                        value: q,
                        lower: q,
                        upper: f64::INFINITY,
                        membership,
                    },
                    OracleValue {
                        value: w_of(q),
                        lower: w_of(q),
                        upper: 1.0,
                        membership,
                    },
                ),
            },
            Membership::Diverged => (
                OracleValue::exact(f64::INFINITY, membership),
                OracleValue::exact(1.0, membership),
            ),
            Membership::Undetermined => (
                OracleValue {
                    value: q,
                    lower: q,
                    upper: f64::INFINITY,
                    membership,
                },
                OracleValue {
                    value: w_of(q),
                    lower: w_of(q),
                    upper: 1.0,
                    membership,
                },
            ),
        };
        Ok(OracleRow {
            point: x0.to_vec(),
            membership,
            w,
            v,
            entry_time: run.entry.map(|e| e.0),
        })
    }

    pub fn w(&self, x0: &[f64], lambda: f64, beta: u32) -> Result<OracleValue, DynamicsError> {
        Ok(self.evaluate(x0, lambda, beta)?.w)
    }

    pub fn v(&self, x0: &[f64], beta: u32) -> Result<OracleValue, DynamicsError> {
        Ok(self.evaluate(x0, 1.0, beta)?.v)
    }

    /// Parallel membership over a batch; order of results matches input.
    pub fn classify_batch(&self, points: &[Vec<f64>]) -> Vec<Result<Membership, DynamicsError>> {
        points.par_iter().map(|x| self.classify(x)).collect()
    }

    pub fn evaluate_batch(
        &self,
        points: &[Vec<f64>],
        lambda: f64,
        beta: u32,
    ) -> Vec<Result<OracleRow, DynamicsError>> {
        points
            .par_iter()
            .map(|x| self.evaluate(x, lambda, beta))
            .collect()
    }
}

pub fn roa_member(
    f: &VectorField,
    x0: &[f64],
    cfg: &OracleConfig,
) -> Result<Membership, DynamicsError> {
    Oracle::new(f, cfg)?.classify(x0)
}

/// `F_η(x0)`, or `None` when the ball is not reached.
pub fn entry_time(
    f: &VectorField,
    x0: &[f64],
    eta: f64,
    cfg: &OracleConfig,
) -> Result<Option<f64>, DynamicsError> {
    let cfg = OracleConfig { eta, ..cfg.clone() };
    Oracle::new(f, &cfg)?.entry_time(x0)
}

pub fn w_oracle(
    f: &VectorField,
    x0: &[f64],
    lambda: f64,
    beta: u32,
    cfg: &OracleConfig,
) -> Result<OracleValue, DynamicsError> {
    Oracle::new(f, cfg)?.w(x0, lambda, beta)
}

pub fn v_oracle(
    f: &VectorField,
    x0: &[f64],
    beta: u32,
    cfg: &OracleConfig,
) -> Result<OracleValue, DynamicsError> {
    Oracle::new(f, cfg)?.v(x0, beta)
}
