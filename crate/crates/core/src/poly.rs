//! Sparse multivariate polynomials over `f64`.
//!
//! Monomials are exponent vectors kept in graded-lexicographic order, so the
//! same index is used everywhere a monomial basis appears: moment vectors,
//! Gram bases and certificate coefficient lists.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VectorField;

/// Terms whose magnitude falls below this fraction of the largest operand
/// coefficient are dropped after arithmetic.
pub const STRUCTURAL_ZERO: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected} variables, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate box along axis {axis}: lower bound {lo} is not below upper bound {hi}")]
    DegenerateBox { axis: usize, lo: f64, hi: f64 },
}

/// Exponent vector of a monomial `x_1^e_1 ... x_n^e_n`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    /// The monomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^e` evaluated at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: lower total degree first, then larger powers of
    /// earlier variables first (`x1^2 < x1 x2 < x2^2`).
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n` variables of total degree at most `d`, in
/// graded-lexicographic order. Length is `C(n + d, n)`.
pub fn monomial_basis(n: usize, d: u32) -> Vec<Monomial> {
    let mut out = Vec::with_capacity(binomial(n as u64 + d as u64, n as u64) as usize);
    for deg in 0..=d {
        let mut cur = vec![0u32; n];
        homogeneous(n, 0, deg, &mut cur, &mut out);
    }
    out
}

// Emits degree-`rest` monomials over variables `i..n`, largest power of the
// earliest variable first.
fn homogeneous(n: usize, i: usize, rest: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if i == n - 1 {
        cur[i] = rest;
        out.push(Monomial(cur.clone()));
        cur[i] = 0;
        return;
    }
    for e in (0..=rest).rev() {
        cur[i] = e;
        homogeneous(n, i + 1, rest - e, cur, out);
    }
    cur[i] = 0;
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Sparse polynomial: monomial → coefficient.
#[derive(Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars >= 1, "polynomials need at least one variable");
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(Monomial::one(nvars), c);
        }
        p
    }

    /// The coordinate polynomial `x_i` (zero-based `i`).
    pub fn var(nvars: usize, i: usize) -> Self {
        Poly::monomial(Monomial::var(nvars, i), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Poly::zero(m.nvars());
        if c != 0.0 {
            p.terms.insert(m, c);
        }
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, summing
    /// repeated monomials.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Poly::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(PolyError::DimensionMismatch {
                    expected: nvars,
                    found: e.len(),
                });
            }
            *p.terms.entry(Monomial(e)).or_insert(0.0) += c;
        }
        p.terms.retain(|_, c| *c != 0.0);
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Direct sum of coefficient × monomial, in basis order.
    pub fn eval(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    fn check(&self, other: &Poly) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: other.nvars,
            })
        } else {
            Ok(())
        }
    }

    fn prune(&mut self, scale: f64) {
        let cut = STRUCTURAL_ZERO * scale;
        self.terms.retain(|_, c| c.abs() > cut);
    }

    pub fn add(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Poly) -> Result<Poly, PolyError> {
        self.check(other)?;
        let scale = self.max_abs_coeff().max(a.abs() * other.max_abs_coeff());
        let mut out = self.clone();
        for (m, c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += a * c;
        }
        out.prune(scale);
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> Poly {
        if a == 0.0 {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.check(other)?;
        let mut out = Poly::zero(self.nvars);
        let mut scale = 0.0f64;
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let prod = ca * cb;
                scale = scale.max(prod.abs());
                *out.terms.entry(ma.mul(mb)).or_insert(0.0) += prod;
            }
        }
        out.prune(scale);
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::constant(self.nvars, 1.0);
        for _ in 0..k {
            acc = acc.mul(self).expect("same nvars");
        }
        acc
    }

    /// `∂p/∂x_i`.
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut d = m.0.clone();
            d[i] -= 1;
            *out.terms.entry(Monomial(d)).or_insert(0.0) += c * e as f64;
        }
        out
    }

    pub fn gradient(&self) -> Vec<Poly> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    /// Substitutes `x_i → s_i x_i`.
    pub fn scale_vars(&self, s: &[f64]) -> Poly {
        assert_eq!(s.len(), self.nvars);
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let v = c * m.eval(s);
            if v != 0.0 {
                out.terms.insert(m.clone(), v);
            }
        }
        out
    }

    /// Coefficient vector over `basis`; errors if a term is not in the basis.
    pub fn coefficients_in(&self, basis: &[Monomial]) -> Option<Vec<f64>> {
        let mut hits = 0;
        let v: Vec<f64> = basis
            .iter()
            .map(|m| {
                let c = self.coeff(m);
                if self.terms.contains_key(m) {
                    hits += 1;
                }
                c
            })
            .collect();
        (hits == self.terms.len()).then_some(v)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            write!(f, "{}*{}", c.abs(), m)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    exponents: Vec<u32>,
    coefficient: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyRecord {
    nvars: usize,
    terms: Vec<TermRecord>,
}

impl Serialize for Poly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolyRecord {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| TermRecord {
                    exponents: m.0.clone(),
                    coefficient: c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = PolyRecord::deserialize(d)?;
        if rec.nvars == 0 {
            return Err(serde::de::Error::custom("nvars must be positive"));
        }
        Poly::from_terms(
            rec.nvars,
            rec.terms.into_iter().map(|t| (t.exponents, t.coefficient)),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// `∇J · f`, the derivative of `J` along the vector field.
pub fn lie_derivative(j: &Poly, f: &VectorField) -> Result<Poly, PolyError> {
    if j.nvars() != f.nvars() {
        return Err(PolyError::DimensionMismatch {
            expected: f.nvars(),
            found: j.nvars(),
        });
    }
    let mut out = Poly::zero(j.nvars());
    for (i, fi) in f.components().iter().enumerate() {
        out = out.add(&j.derivative(i).mul(fi)?)?;
    }
    Ok(out)
}

/// `‖x‖₂^{2β} = (x_1² + … + x_n²)^β`.
pub fn norm_power(n: usize, beta: u32) -> Poly {
    norm_squared(n).pow(beta)
}

pub fn norm_squared(n: usize) -> Poly {
    let mut p = Poly::zero(n);
    for i in 0..n {
        let mut e = vec![0; n];
        e[i] = 2;
        p.terms.insert(Monomial(e), 1.0);
    }
    p
}

/// Axis-aligned box `[a_1, b_1] × … × [a_n, b_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, PolyError> {
        if lo.len() != hi.len() {
            return Err(PolyError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        for (axis, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a < b) {
                return Err(PolyError::DegenerateBox { axis, lo: a, hi: b });
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    /// `[-h_1, h_1] × … × [-h_n, h_n]`.
    pub fn symmetric(half_widths: &[f64]) -> Result<Self, PolyError> {
        BoxDomain::new(
            half_widths.iter().map(|h| -h).collect(),
            half_widths.to_vec(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// All `2^n` corners.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.hi[i]
                        } else {
                            self.lo[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Maps `u ∈ [0,1]^n` into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (a, b))| a + t * (b - a))
            .collect()
    }

    pub fn scaled(&self, s: f64) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().map(|a| a * s).collect(),
            hi: self.hi.iter().map(|b| b * s).collect(),
        }
    }
}

/// Integrals of the degree-`d` monomial basis over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub degree: u32,
    pub domain: BoxDomain,
    pub basis: Vec<Monomial>,
    pub entries: Vec<f64>,
}

impl MomentVector {
    /// `∫_Λ p(x) dx` for `p` supported on the basis.
    pub fn integrate(&self, p: &Poly) -> f64 {
        p.terms()
            .map(|(m, c)| c * monomial_integral(m, &self.domain))
            .sum()
    }
}

/// `∫_Λ x^e dx = ∏ (b_i^{e_i+1} − a_i^{e_i+1}) / (e_i + 1)`.
pub fn monomial_integral(m: &Monomial, domain: &BoxDomain) -> f64 {
    m.0.iter()
        .zip(domain.lo.iter().zip(&domain.hi))
        .map(|(&e, (&a, &b))| {
            if e % 2 == 1 && a == -b {
                0.0
            } else {
                let k = e as i32 + 1;
                (b.powi(k) - a.powi(k)) / k as f64
            }
        })
        .product()
}

pub fn box_moments(d: u32, domain: &BoxDomain) -> Result<MomentVector, PolyError> {
    let checked = BoxDomain::new(domain.lo.clone(), domain.hi.clone())?;
    let basis = monomial_basis(checked.dim(), d);
    let entries = basis
        .iter()
        .map(|m| monomial_integral(m, &checked))
        .collect();
    Ok(MomentVector {
        degree: d,
        domain: checked,
        basis,
        entries,
    })
}
