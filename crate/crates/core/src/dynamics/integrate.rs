//! Dormand–Prince 5(4) integration with ball-entry and escape events.

use serde::{Deserialize, Serialize};

use super::{DynamicsError, OracleConfig, VectorField};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Autonomous systems only, so the nodes c_i are not needed.
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    EnteredBall,
    Escaped,
    TimedOut,
}

/// Sampled solution map `t ↦ φ_f(x0, t)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }
}

/// Adaptive DOPRI5 stepper over an autonomous system of dimension `m`.
pub(crate) struct Stepper<F: Fn(&[f64], &mut [f64])> {
    rhs: F,
    pub t: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
    pub h: f64,
    rtol: f64,
    atol: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    pub prev_t: f64,
    pub prev_y: Vec<f64>,
    pub prev_dy: Vec<f64>,
}

impl<F: Fn(&[f64], &mut [f64])> Stepper<F> {
    pub fn new(rhs: F, y0: Vec<f64>, rtol: f64, atol: f64) -> Self {
        let m = y0.len();
        let mut dy = vec![0.0; m];
        rhs(&y0, &mut dy);
        let mut s = Stepper {
            rhs,
            t: 0.0,
            prev_t: 0.0,
            prev_y: y0.clone(),
            prev_dy: dy.clone(),
            y: y0,
            dy,
            h: 0.0,
            rtol,
            atol,
            k: std::array::from_fn(|_| vec![0.0; m]),
            tmp: vec![0.0; m],
        };
        s.h = s.initial_step();
        s
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + self.rtol * a.abs().max(b.abs())
    }

    fn rms(&self, v: &[f64], refy: &[f64]) -> f64 {
        let m = v.len() as f64;
        (v.iter()
            .zip(refy)
            .map(|(e, y)| (e / self.scale(*y, *y)).powi(2))
            .sum::<f64>()
            / m)
            .sqrt()
    }

    // Hairer–Wanner starting step heuristic.
    fn initial_step(&mut self) -> f64 {
        let d0 = self.rms(&self.y, &self.y);
        let d1 = self.rms(&self.dy, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        for i in 0..self.y.len() {
            self.tmp[i] = self.y[i] + h0 * self.dy[i];
        }
        let mut f1 = vec![0.0; self.y.len()];
        (self.rhs)(&self.tmp, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(&self.dy).map(|(a, b)| (a - b) / h0).collect();
        let d2 = self.rms(&diff, &self.y);
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(0.1)
    }

    /// Advances one accepted step, never past `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<(), DynamicsError> {
        let m = self.y.len();
        loop {
            let mut h = self.h.min(t_end - self.t);
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(DynamicsError::StepUnderflow { t: self.t, h });
            }
            self.k[0].copy_from_slice(&self.dy);
            for s in 1..7 {
                for i in 0..m {
                    let mut acc = self.y[i];
                    for j in 0..s {
                        acc += h * A[s][j] * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                (self.rhs)(&self.tmp, &mut self.k[s]);
            }
            // k[6] was evaluated at the 5th-order solution (FSAL), held in tmp.
            let mut err = 0.0;
            let mut finite = true;
            for i in 0..m {
                let mut e = 0.0;
                for s in 0..7 {
                    e += E[s] * self.k[s][i];
                }
                e *= h;
                let sc = self.scale(self.y[i], self.tmp[i]);
                err += (e / sc).powi(2);
                finite &= self.tmp[i].is_finite();
            }
            let err = (err / m as f64).sqrt();
            if !finite || !err.is_finite() {
                self.h = h * 0.1;
                continue;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.prev_t = self.t;
                std::mem::swap(&mut self.prev_y, &mut self.y);
                std::mem::swap(&mut self.prev_dy, &mut self.dy);
                self.y.copy_from_slice(&self.tmp);
                self.dy.copy_from_slice(&self.k[6]);
                self.t += h;
                self.h = h * fac;
                return Ok(());
            }
            h *= fac.min(1.0);
            self.h = h;
        }
    }

    /// Cubic Hermite interpolant on the last accepted step.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        hermite(
            self.prev_t,
            &self.prev_y,
            &self.prev_dy,
            self.t,
            &self.y,
            &self.dy,
            t,
            out,
        );
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn hermite(
    t0: f64,
    y0: &[f64],
    d0: &[f64],
    t1: f64,
    y1: &[f64],
    d1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = if h == 0.0 { 0.0 } else { (t - t0) / h };
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Outcome of one oracle simulation.
#[derive(Debug, Clone)]
pub(crate) struct Run {
    pub trajectory: Trajectory,
    /// `(F_η, q(F_η))` when the ball was entered.
    pub entry: Option<(f64, f64)>,
    /// `∫₀^T ‖φ‖^{2β}` at the final time.
    pub integral: f64,
    /// Bound on the neglected tail, if one was established.
    pub tail: Option<f64>,
}

/// Exponential-decay model `‖φ(x,t)‖ ≤ μ e^{−δt}‖x‖` inside the entry ball.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TailModel {
    pub mu: f64,
    pub delta: f64,
}

pub(crate) struct RunOptions {
    pub horizon: f64,
    pub events: bool,
    pub beta: u32,
    pub tail: Option<TailModel>,
}

/// Integrates `ẋ = f(x)` together with `q̇ = ‖x‖^{2β}`.
pub(crate) fn simulate(
    f: &VectorField,
    x0: &[f64],
    cfg: &OracleConfig,
    opts: &RunOptions,
) -> Result<Run, DynamicsError> {
    let n = f.nvars();
    if x0.len() != n {
        return Err(DynamicsError::Poly(
            crate::poly::PolyError::DimensionMismatch {
                expected: n,
                found: x0.len(),
            },
        ));
    }
    let beta = opts.beta as i32;
    let rhs = |y: &[f64], out: &mut [f64]| {
        f.eval_into(&y[..n], &mut out[..n]);
        let r2: f64 = y[..n].iter().map(|v| v * v).sum();
        out[n] = r2.powi(beta);
    };
    let mut y0 = x0.to_vec();
    y0.push(0.0);

    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let tail_bound = |x: &[f64]| {
        opts.tail.map(|m| {
            let b = opts.beta as f64;
            (m.mu * norm(x)).powi(2 * beta) / (2.0 * m.delta * b)
        })
    };

    let mut entry = None;
    if opts.events && norm(x0) <= cfg.eta {
        entry = Some((0.0, 0.0));
        if opts.tail.is_none() {
            return Ok(Run {
                trajectory: Trajectory {
                    times,
                    states,
                    terminal: Terminal::EnteredBall,
                },
                entry,
                integral: 0.0,
                tail: None,
            });
        }
        let b = tail_bound(x0).unwrap();
        if b < cfg.tail_tol {
            return Ok(Run {
                trajectory: Trajectory {
                    times,
                    states,
                    terminal: Terminal::EnteredBall,
                },
                entry,
                integral: 0.0,
                tail: Some(b),
            });
        }
    }

    let mut st = Stepper::new(rhs, y0, cfg.rel_tol, cfg.abs_tol);
    let mut buf = vec![0.0; n + 1];
    loop {
        st.step(opts.horizon)?;
        let x1 = &st.y[..n];
        let r1 = norm(x1);

        if opts.events && entry.is_none() && r1 <= cfg.eta {
            // Bisect g(t) = ‖x(t)‖ − η on the Hermite interpolant.
            let (mut lo, mut hi) = (st.prev_t, st.t);
            for _ in 0..super::CROSSING_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                st.interpolate(mid, &mut buf);
                if norm(&buf[..n]) <= cfg.eta {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            st.interpolate(hi, &mut buf);
            entry = Some((hi, buf[n]));
            if opts.tail.is_none() {
                times.push(hi);
                states.push(buf[..n].to_vec());
                return Ok(Run {
                    trajectory: Trajectory {
                        times,
                        states,
                        terminal: Terminal::EnteredBall,
                    },
                    entry,
                    integral: buf[n],
                    tail: None,
                });
            }
        }

        times.push(st.t);
        states.push(x1.to_vec());

        if opts.events {
            if entry.is_some() && r1 <= cfg.eta {
                if let Some(b) = tail_bound(x1) {
                    if b < cfg.tail_tol {
                        return Ok(Run {
                            trajectory: Trajectory {
                                times,
                                states,
                                terminal: Terminal::EnteredBall,
                            },
                            entry,
                            integral: st.y[n],
                            tail: Some(b),
                        });
                    }
                }
            }
            if r1 >= cfg.escape_radius {
                return Ok(Run {
                    trajectory: Trajectory {
                        times,
                        states,
                        terminal: Terminal::Escaped,
                    },
                    entry,
                    integral: st.y[n],
                    tail: None,
                });
            }
        }

        if st.t >= opts.horizon {
            let terminal = if entry.is_some() {
                Terminal::EnteredBall
            } else {
                Terminal::TimedOut
            };
            let tail = if entry.is_some() {
                tail_bound(&st.y[..n])
            } else {
                None
            };
            let integral = st.y[n];
            return Ok(Run {
                trajectory: Trajectory {
                    times,
                    states,
                    terminal,
                },
                entry,
                integral,
                tail,
            });
        }
    }
}

/// Simulates from `x0` for at most `min(horizon, cfg.t_max)`, stopping early
/// when the trajectory enters `B_η(0)` or leaves `B_{R_escape}(0)`.
pub fn integrate(
    f: &VectorField,
    x0: &[f64],
    horizon: f64,
    cfg: &OracleConfig,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    let opts = RunOptions {
        horizon: horizon.min(cfg.t_max),
        events: true,
        beta: 1,
        tail: None,
    };
    Ok(simulate(f, x0, cfg, &opts)?.trajectory)
}

/// `φ_f(x0, t)` with no event handling.
pub fn flow(
    f: &VectorField,
    x0: &[f64],
    t: f64,
    cfg: &OracleConfig,
) -> Result<Vec<f64>, DynamicsError> {
    cfg.validate()?;
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let opts = RunOptions {
        horizon: t,
        events: false,
        beta: 1,
        tail: None,
    };
    Ok(simulate(f, x0, cfg, &opts)?
        .trajectory
        .final_state()
        .to_vec())
}

/// Samples the trajectory of `−f` after discarding a transient; for systems
/// whose region of attraction is bounded by an unstable limit cycle this
/// traces the boundary.
pub fn reverse_time_orbit(
    f: &VectorField,
    start: &[f64],
    settle: f64,
    record: f64,
    cfg: &OracleConfig,
) -> Result<Vec<Vec<f64>>, DynamicsError> {
    let rev = f.reversed();
    let x = flow(&rev, start, settle, cfg)?;
    let opts = RunOptions {
        horizon: record,
        events: false,
        beta: 1,
        tail: None,
    };
    Ok(simulate(&rev, &x, cfg, &opts)?.trajectory.states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    fn decay() -> VectorField {
        VectorField::new(vec![Poly::from_terms(1, [(vec![1], -1.0)]).unwrap()]).unwrap()
    }

    fn rotation() -> VectorField {
        VectorField::new(vec![
            Poly::from_terms(2, [(vec![0, 1], -1.0)]).unwrap(),
            Poly::from_terms(2, [(vec![1, 0], 1.0)]).unwrap(),
        ])
        .unwrap()
    }

    fn cfg() -> OracleConfig {
        OracleConfig {
            eta: 1e-3,
            ..OracleConfig::default()
        }
    }

    #[test]
    fn exponential_decay() {
        let x = flow(&decay(), &[1.0], 1.0, &cfg()).unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn rotation_conserves_norm() {
        for t in [0.5, 3.0, 20.0] {
            let x = flow(&rotation(), &[1.0, 0.0], t, &cfg()).unwrap();
            assert!((norm(&x) - 1.0).abs() < 1e-7, "t = {t}: {x:?}");
        }
    }

    #[test]
    fn semigroup() {
        let f = VectorField::van_der_pol();
        let x0 = [1.0, 1.0];
        let once = flow(&f, &x0, 2.0, &cfg()).unwrap();
        let half = flow(&f, &x0, 1.0, &cfg()).unwrap();
        let twice = flow(&f, &half, 1.0, &cfg()).unwrap();
        for i in 0..2 {
            assert!((once[i] - twice[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn trajectory_starts_at_initial_condition() {
        let traj = integrate(&VectorField::van_der_pol(), &[0.3, -0.2], 50.0, &cfg()).unwrap();
        assert_eq!(traj.states[0], vec![0.3, -0.2]);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(traj.terminal, Terminal::EnteredBall);
        assert!(norm(traj.final_state()) <= 1e-3 + 1e-12);
    }

    #[test]
    fn timed_out_on_short_horizon() {
        let traj = integrate(&rotation(), &[1.0, 0.0], 2.0, &cfg()).unwrap();
        assert_eq!(traj.terminal, Terminal::TimedOut);
        assert!((traj.final_time() - 2.0).abs() < 1e-12);
    }
}
