use serde::{Deserialize, Serialize};

use crate::poly::{Poly, PolyError};

use super::DynamicsError;

/// Polynomial vector field `ẋ = f(x)` with an equilibrium at the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorField {
    components: Vec<Poly>,
    #[serde(skip)]
    flat: Vec<Vec<(Vec<i32>, f64)>>,
}

impl VectorField {
    pub fn new(components: Vec<Poly>) -> Result<Self, DynamicsError> {
        let n = components.len();
        if n == 0 {
            return Err(DynamicsError::EmptyField);
        }
        for (i, c) in components.iter().enumerate() {
            if c.nvars() != n {
                return Err(DynamicsError::Poly(PolyError::DimensionMismatch {
                    expected: n,
                    found: c.nvars(),
                }));
            }
            let c0 = c.coeff(&crate::poly::Monomial::one(n));
            if c0 != 0.0 {
                return Err(DynamicsError::NonzeroAtOrigin {
                    component: i,
                    value: c0,
                });
            }
        }
        let flat = components
            .iter()
            .map(|c| {
                c.terms()
                    .map(|(m, v)| (m.exponents().iter().map(|&e| e as i32).collect(), v))
                    .collect()
            })
            .collect();
        Ok(VectorField { components, flat })
    }

    pub fn nvars(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, terms) in out.iter_mut().zip(&self.flat) {
            let mut acc = 0.0;
            for (e, c) in terms {
                let mut t = *c;
                for (xi, &ei) in x.iter().zip(e) {
                    if ei != 0 {
                        t *= xi.powi(ei);
                    }
                }
                acc += t;
            }
            *o = acc;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nvars()];
        self.eval_into(x, &mut out);
        out
    }

    /// Jacobian at the origin, read off the linear coefficients.
    pub fn linearization(&self) -> nalgebra::DMatrix<f64> {
        let n = self.nvars();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            self.components[i].coeff(&crate::poly::Monomial::var(n, j))
        })
    }

    /// Jacobian at an arbitrary point.
    pub fn jacobian(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let n = self.nvars();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            self.components[i].derivative(j).eval_unchecked(x)
        })
    }

    /// `x ↦ f(s x) / s`, the field in coordinates `z = x / s`.
    pub fn rescaled(&self, s: f64) -> VectorField {
        let n = self.nvars();
        let comps = self
            .components
            .iter()
            .map(|c| c.scale_vars(&vec![s; n]).scale(1.0 / s))
            .collect();
        VectorField::new(comps).expect("rescaling preserves f(0) = 0")
    }

    /// The time-reversed field `-f`.
    pub fn reversed(&self) -> VectorField {
        VectorField::new(self.components.iter().map(|c| c.scale(-1.0)).collect())
            .expect("negation preserves f(0) = 0")
    }

    /// Reversed-time Van der Pol oscillator, `ẋ₁ = −x₂`, `ẋ₂ = x₁ − x₂(1 − x₁²)`.
    pub fn van_der_pol() -> VectorField {
        let p = |t: &[(&[u32], f64)]| {
            Poly::from_terms(2, t.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
        };
        VectorField::new(vec![
            p(&[(&[0, 1], -1.0)]),
            p(&[(&[1, 0], 1.0), (&[0, 1], -1.0), (&[2, 1], 1.0)]),
        ])
        .unwrap()
    }

    /// Third-order servomechanism with multiplicative feedback,
    /// `f = [x₂, x₃, (−x₃ − K₂(1 − K₃x₁²)x₂ − K₁x₁)/T]`.
    pub fn servomechanism(t: f64, k1: f64, k2: f64, k3: f64) -> VectorField {
        let p = |terms: &[(&[u32], f64)]| {
            Poly::from_terms(3, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
        };
        VectorField::new(vec![
            p(&[(&[0, 1, 0], 1.0)]),
            p(&[(&[0, 0, 1], 1.0)]),
            p(&[
                (&[0, 0, 1], -1.0 / t),
                (&[0, 1, 0], -k2 / t),
                (&[2, 1, 0], k2 * k3 / t),
                (&[1, 0, 0], -k1 / t),
            ]),
        ])
        .unwrap()
    }

    /// `ẋ = −x + x³`, region of attraction `(−1, 1)`.
    pub fn scalar_cubic() -> VectorField {
        VectorField::new(vec![
            Poly::from_terms(1, [(vec![1], -1.0), (vec![3], 1.0)]).unwrap()
        ])
        .unwrap()
    }
}

impl<'de> Deserialize<'de> for VectorField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            components: Vec<Poly>,
        }
        let r = Repr::deserialize(d)?;
        VectorField::new(r.components).map_err(serde::de::Error::custom)
    }
}
