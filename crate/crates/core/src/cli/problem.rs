use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::dynamics::{OracleConfig, VectorField};
use crate::pipeline::RoaSpec;
use crate::poly::{BoxDomain, Poly};

pub const PROBLEM_SCHEMA: &str = "roacert-problem/1";

/// One `{exponents, coefficient}` record of a polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

/// A single degree or a list for sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Degrees {
    One(u32),
    Many(Vec<u32>),
}

impl Degrees {
    pub fn list(&self) -> Vec<u32> {
        match self {
            Degrees::One(d) => vec![*d],
            Degrees::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecBlock {
    pub lambda: f64,
    pub beta: u32,
    pub radius: f64,
    #[serde(rename = "box")]
    pub domain: BoxDomain,
    pub degree: Degrees,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub eta: f64,
    pub t_max: f64,
    #[serde(default = "default_escape")]
    pub escape_radius: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub tail_tol: f64,
    #[serde(default)]
    pub allow_non_hurwitz: bool,
    pub seed: u64,
    /// Verification samples.
    pub samples: usize,
    /// Volume and `D_V` samples.
    pub volume_samples: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_margin() -> f64 {
    1e-6
}

fn default_escape() -> f64 {
    OracleConfig::default().escape_radius
}

/// Problem description read by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: String,
    pub name: String,
    pub nvars: usize,
    /// One term list per component of `f`.
    pub field: Vec<Vec<Term>>,
    pub spec: SpecBlock,
    pub oracle: OracleBlock,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile, CliError> {
        let p: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if p.schema != PROBLEM_SCHEMA {
            return Err(CliError::Invalid(format!(
                "schema {:?} is not {PROBLEM_SCHEMA:?}",
                p.schema
            )));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes") + "\n"
    }

    /// Builds and checks `f`; `f(0) = 0` is enforced by [`VectorField::new`].
    pub fn vector_field(&self) -> Result<VectorField, CliError> {
        if self.field.len() != self.nvars {
            return Err(CliError::Invalid(format!(
                "field has {} components, nvars is {}",
                self.field.len(),
                self.nvars
            )));
        }
        let comps = self
            .field
            .iter()
            .enumerate()
            .map(|(i, terms)| {
                Poly::from_terms(
                    self.nvars,
                    terms.iter().map(|t| (t.exponents.clone(), t.coefficient)),
                )
                .map_err(|e| CliError::Invalid(format!("field component {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(comps).map_err(|e| CliError::Invalid(format!("vector field: {e}")))
    }

    /// Spec at `degree`, checked including `Λ ⊂ B_R(0)`.
    pub fn roa_spec(&self, degree: u32) -> Result<RoaSpec, CliError> {
        let s = &self.spec;
        let domain = BoxDomain::new(s.domain.lo.clone(), s.domain.hi.clone())
            .map_err(|e| CliError::Invalid(format!("box: {e}")))?;
        let spec = RoaSpec {
            tol: s.tol,
            margin: s.margin,
            seed: self.oracle.seed,
            samples: self.oracle.samples,
            volume_samples: self.oracle.volume_samples,
            ..RoaSpec::new(s.lambda, s.beta, s.radius, domain, degree)
        };
        spec.validate(self.nvars)
            .map_err(|e| CliError::Invalid(format!("spec: {e}")))?;
        Ok(spec)
    }

    pub fn oracle_config(&self) -> Result<OracleConfig, CliError> {
        let o = &self.oracle;
        let cfg = OracleConfig {
            eta: o.eta,
            escape_radius: o.escape_radius,
            t_max: o.t_max,
            rel_tol: o.rel_tol,
            abs_tol: o.abs_tol,
            tail_tol: o.tail_tol,
            allow_non_hurwitz: o.allow_non_hurwitz,
        };
        cfg.validate()
            .map_err(|e| CliError::Invalid(format!("oracle: {e}")))?;
        Ok(cfg)
    }
}

/// SHA-256 over `blob <len>\0<bytes>`, the object hash git uses in SHA-256
/// repositories.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = include_str!("../../problems/scalar.json");

    #[test]
    fn bundled_scalar_round_trips() {
        let p = ProblemFile::parse(SCALAR).unwrap();
        assert_eq!(ProblemFile::parse(&p.to_json()).unwrap(), p);
        assert_eq!(p.spec.degree.list(), vec![4, 6, 8, 10]);
        p.vector_field().unwrap();
        p.roa_spec(6).unwrap();
    }

    #[test]
    fn parse_error_has_position() {
        let err = ProblemFile::parse("{\n  \"schema\": \"roacert-problem/1\",\n  \"name\": 3\n}")
            .unwrap_err();
        match err {
            CliError::Parse { line, column, .. } => assert_eq!((line, column), (3, 11)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn box_outside_ball_is_invalid() {
        let mut p = ProblemFile::parse(SCALAR).unwrap();
        p.spec.radius = 1.0;
        assert!(
            matches!(p.roa_spec(4), Err(CliError::Invalid(m)) if m.contains("not inside the ball"))
        );
    }

    #[test]
    fn git_style_hash() {
        // Matches `git hash-object --object-format=sha256` on an empty file.
        assert_eq!(
            content_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
