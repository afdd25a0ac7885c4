//! Linearization at the origin and a sampled quadratic basin estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::VectorField;

/// Fraction of the spectral abscissa kept as the reported decay rate.
pub const DECAY_MARGIN: f64 = 0.1;

/// Real parts within this distance of zero are reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalStability {
    pub jacobian: Vec<Vec<f64>>,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub hurwitz: bool,
    /// Some eigenvalue sits on the imaginary axis (within tolerance).
    pub marginal: bool,
    /// Solution of `AᵀP + PA = −I`, present when Hurwitz.
    pub lyapunov: Option<Vec<Vec<f64>>>,
    /// Radius of the largest ball inside the sampled invariant ellipsoid.
    /// Empirical, not a rigorous bound.
    pub eta_estimate: Option<f64>,
    /// `sqrt(cond P)`.
    pub mu: Option<f64>,
    /// `|max Re λ| · (1 − margin)`.
    pub delta: Option<f64>,
}

impl LocalStability {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lyapunov_matrix(&self) -> Option<DMatrix<f64>> {
        self.lyapunov.as_ref().map(|rows| {
            let n = rows.len();
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        })
    }
}

/// Solves `AᵀP + PA = −I` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let at = a.transpose();
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DVector::from_iterator(
        n * n,
        (0..n * n).map(|i| if i % (n + 1) == 0 { -1.0 } else { 0.0 }),
    );
    let sol = k.lu().solve(&rhs)?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Some((&p + p.transpose()) * 0.5)
}

fn directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..720)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 360.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere.
            let m = 4000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            // Coordinate and diagonal directions only.
            let mut out = Vec::new();
            for i in 0..n {
                for s in [-1.0, 1.0] {
                    let mut d = vec![0.0; n];
                    d[i] = s;
                    out.push(d);
                }
            }
            for mask in 0..1usize << n {
                let s = 1.0 / (n as f64).sqrt();
                out.push(
                    (0..n)
                        .map(|i| if mask >> i & 1 == 1 { s } else { -s })
                        .collect(),
                );
            }
            out
        }
    }
}

/// Linearizes `f` at the origin. When the Jacobian is Hurwitz, also grows the
/// sublevel set `{xᵀPx ≤ c}` until the sampled decrease condition
/// `2xᵀP f(x) < 0` first fails, capped at `max_radius`.
pub fn local_stability(f: &VectorField, max_radius: f64) -> LocalStability {
    let n = f.nvars();
    let a = f.linearization();
    let eig = a.complex_eigenvalues();
    let eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    let max_re = eigenvalues
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let hurwitz = max_re < -MARGINAL_TOL;
    let marginal = max_re.abs() <= MARGINAL_TOL;
    let jacobian = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect();

    let mut out = LocalStability {
        jacobian,
        eigenvalues,
        hurwitz,
        marginal,
        lyapunov: None,
        eta_estimate: None,
        mu: None,
        delta: None,
    };
    if !hurwitz {
        return out;
    }
    let Some(p) = solve_lyapunov(&a) else {
        return out;
    };
    let ev = p.clone().symmetric_eigenvalues();
    let lmin = ev.min();
    let lmax = ev.max();
    if lmin <= 0.0 {
        return out;
    }

    let c_cap = lmin * max_radius * max_radius;
    let mut c = c_cap;
    let steps = 400;
    let mut fx = vec![0.0; n];
    for d in directions(n) {
        let dv = DVector::from_column_slice(&d);
        let q = (dv.transpose() * &p * &dv)[(0, 0)];
        let r_max = (c_cap / q).sqrt();
        for k in 1..=steps {
            let r = r_max * k as f64 / steps as f64;
            let x: Vec<f64> = d.iter().map(|v| v * r).collect();
            f.eval_into(&x, &mut fx);
            let px = &p * DVector::from_column_slice(&x);
            let vdot = 2.0 * px.iter().zip(&fx).map(|(a, b)| a * b).sum::<f64>();
            if vdot >= 0.0 {
                let r_ok = r_max * (k - 1) as f64 / steps as f64;
                c = c.min(r_ok * r_ok * q);
                break;
            }
        }
    }
    out.lyapunov = Some(
        (0..n)
            .map(|i| (0..n).map(|j| p[(i, j)]).collect())
            .collect(),
    );
    out.eta_estimate = Some((c / lmax).sqrt());
    out.mu = Some((lmax / lmin).sqrt());
    out.delta = Some(max_re.abs() * (1.0 - DECAY_MARGIN));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    #[test]
    fn van_der_pol_linearization() {
        let s = local_stability(&VectorField::van_der_pol(), 1.0);
        assert_eq!(s.jacobian, vec![vec![0.0, -1.0], vec![1.0, -1.0]]);
        assert!(s.hurwitz);
        // λ² + λ + 1 = 0
        for (re, im) in &s.eigenvalues {
            assert!((re + 0.5).abs() < 1e-12);
            assert!((im.abs() - 3f64.sqrt() / 2.0).abs() < 1e-12);
        }
        let p = s.lyapunov_matrix().unwrap();
        let a = VectorField::van_der_pol().linearization();
        let res = a.transpose() * &p + &p * a + DMatrix::identity(2, 2);
        assert!(res.norm() < 1e-12);
        assert!(p.symmetric_eigenvalues().min() > 0.0);
        assert!(s.eta_estimate.unwrap() > 0.1);
    }

    #[test]
    fn unstable_scalar() {
        let f = VectorField::new(vec![Poly::from_terms(1, [(vec![1], 1.0)]).unwrap()]).unwrap();
        let s = local_stability(&f, 1.0);
        assert!(!s.hurwitz);
        assert!(s.lyapunov.is_none());
    }

    #[test]
    fn servomechanism_is_marginal() {
        // λ³ + λ² + λ + 1 = (λ + 1)(λ² + 1)
        let s = local_stability(&VectorField::servomechanism(1.0, 1.0, 1.0, 1.0), 1.0);
        assert!(!s.hurwitz);
        assert!(s.marginal);
        let mut re: Vec<f64> = s.eigenvalues.iter().map(|e| e.0).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-9);
        assert!(re[1].abs() < 1e-9 && re[2].abs() < 1e-9);
    }

    #[test]
    fn scalar_cubic_basin() {
        // V = x²/2, V̇ = −x²(1 − x²): the basin estimate approaches 1.
        let s = local_stability(&VectorField::scalar_cubic(), 2.0);
        let eta = s.eta_estimate.unwrap();
        assert!(eta < 1.0 && eta > 0.98, "{eta}");
    }
}
