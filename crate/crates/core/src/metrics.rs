//! Monte Carlo volumes and symmetric-difference volumes over boxes.
//!
//! Sample `i` of stream `seed` is drawn from its own ChaCha8 stream, so a
//! sample set is identical for any thread count and any evaluation order.
//! Set comparisons evaluate every indicator on one shared sample set, which
//! makes the metric identities hold exactly rather than statistically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::BoxDomain;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("J_{degree} < V at {point:?} ({j} < {v})")]
    DominanceViolated {
        degree: u32,
        point: Vec<f64>,
        j: f64,
        v: f64,
    },
    #[error("grid volume needs dimension 1 or 2, got {0}")]
    GridDimension(usize),
    #[error("need at least one sample")]
    NoSamples,
}

/// Membership predicate over points of a box.
pub trait IndicatorSet: Sync {
    fn contains(&self, x: &[f64]) -> bool;

    fn label(&self) -> String {
        "set".into()
    }
}

/// Real-valued function over points of a box.
pub trait ScalarField: Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarField for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Closure-backed indicator with a label.
pub struct Predicate<F> {
    pub label: String,
    pub f: F,
}

impl<F: Fn(&[f64]) -> bool + Sync> Predicate<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Predicate {
            label: label.into(),
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> bool + Sync> IndicatorSet for Predicate<F> {
    fn contains(&self, x: &[f64]) -> bool {
        (self.f)(x)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Strict sublevel set `{x : g(x) < γ}`.
pub struct Sublevel<'a> {
    pub field: &'a dyn ScalarField,
    pub gamma: f64,
    pub label: String,
}

impl IndicatorSet for Sublevel<'_> {
    fn contains(&self, x: &[f64]) -> bool {
        self.field.value(x) < self.gamma
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Hit fraction `p̂`, i.e. the volume as a fraction of the box.
    pub fraction: f64,
}

impl VolumeEstimate {
    /// `μ(Λ)·p̂` with standard error `μ(Λ)·sqrt(p̂(1−p̂)/n)`.
    pub fn from_hits(hits: usize, n: usize, box_volume: f64, seed: u64) -> VolumeEstimate {
        let p = hits as f64 / n as f64;
        VolumeEstimate {
            value: box_volume * p,
            std_error: box_volume * (p * (1.0 - p) / n as f64).sqrt(),
            n_samples: n,
            seed,
            fraction: p,
        }
    }
}

/// `i`-th uniform point of stream `seed` in the unit cube `[0,1)^n`.
pub fn unit_sample(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Shared sample set over a box.
#[derive(Debug, Clone)]
pub struct Samples {
    pub domain: BoxDomain,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
}

impl Samples {
    pub fn new(domain: &BoxDomain, n: usize, seed: u64) -> Samples {
        let points = (0..n as u64)
            .into_par_iter()
            .map(|i| domain.from_unit(&unit_sample(seed, i, domain.dim())))
            .collect();
        Samples {
            domain: domain.clone(),
            seed,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn hits(&self, set: &dyn IndicatorSet) -> Vec<bool> {
        self.points.par_iter().map(|x| set.contains(x)).collect()
    }

    pub fn estimate(&self, hits: &[bool]) -> VolumeEstimate {
        let k = hits.iter().filter(|h| **h).count();
        VolumeEstimate::from_hits(k, hits.len(), self.domain.volume(), self.seed)
    }

    pub fn volume(&self, set: &dyn IndicatorSet) -> VolumeEstimate {
        self.estimate(&self.hits(set))
    }

    /// Volume of the symmetric difference `(A∖B) ∪ (B∖A)`.
    pub fn dv(&self, a: &dyn IndicatorSet, b: &dyn IndicatorSet) -> VolumeEstimate {
        self.estimate(&symmetric_difference(&self.hits(a), &self.hits(b)))
    }
}

pub fn symmetric_difference(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| x != y).collect()
}

/// Hit fraction × `μ(Λ)` over `n` counter-based samples.
pub fn volume_mc(
    set: &dyn IndicatorSet,
    domain: &BoxDomain,
    n: usize,
    seed: u64,
) -> VolumeEstimate {
    Samples::new(domain, n, seed).volume(set)
}

/// Monte Carlo estimate of `D_V(A, B) = μ((A∖B) ∪ (B∖A))`.
pub fn dv_mc(
    a: &dyn IndicatorSet,
    b: &dyn IndicatorSet,
    domain: &BoxDomain,
    n: usize,
    seed: u64,
) -> VolumeEstimate {
    Samples::new(domain, n, seed).dv(a, b)
}

/// Midpoint-rule volume on a `cells^n` grid, for `n ≤ 2`.
pub fn volume_grid(
    set: &dyn IndicatorSet,
    domain: &BoxDomain,
    cells: usize,
) -> Result<f64, MetricsError> {
    let n = domain.dim();
    if n == 0 || n > 2 {
        return Err(MetricsError::GridDimension(n));
    }
    let total = cells.pow(n as u32);
    let hits = (0..total)
        .into_par_iter()
        .filter(|&k| {
            let u: Vec<f64> = (0..n)
                .map(|a| ((k / cells.pow(a as u32)) % cells) as f64 + 0.5)
                .map(|i| i / cells as f64)
                .collect();
            set.contains(&domain.from_unit(&u))
        })
        .count();
    Ok(domain.volume() * hits as f64 / total as f64)
}

/// One row of a sublevel convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub degree: u32,
    /// `∫_Λ (J_d − V)` estimate.
    pub l1: VolumeEstimate,
    pub dv: VolumeEstimate,
}

/// For each `J_d ≥ V`, estimates the L¹ distance to `V` and the `D_V` between
/// the strict `γ`-sublevel sets, all on one shared sample set.
pub fn sublevel_convergence_check(
    v: &dyn ScalarField,
    family: &[(u32, &dyn ScalarField)],
    gamma: f64,
    domain: &BoxDomain,
    n: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>, MetricsError> {
    if n == 0 {
        return Err(MetricsError::NoSamples);
    }
    let samples = Samples::new(domain, n, seed);
    let vs: Vec<f64> = samples.points.par_iter().map(|x| v.value(x)).collect();
    let mu = domain.volume();
    let mut rows = Vec::new();
    for &(degree, j) in family {
        let js: Vec<f64> = samples.points.par_iter().map(|x| j.value(x)).collect();
        if let Some(k) = (0..n).find(|&k| js[k] < vs[k] - 1e-9) {
            return Err(MetricsError::DominanceViolated {
                degree,
                point: samples.points[k].clone(),
                j: js[k],
                v: vs[k],
            });
        }
        let diffs: Vec<f64> = js.iter().zip(&vs).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        let l1 = VolumeEstimate {
            value: mu * mean,
            std_error: mu * (var / n as f64).sqrt(),
            n_samples: n,
            seed,
            fraction: mean,
        };
        let hits: Vec<bool> = js
            .iter()
            .zip(&vs)
            .map(|(a, b)| (*a < gamma) != (*b < gamma))
            .collect();
        rows.push(ConvergenceRow {
            degree,
            l1,
            dv: samples.estimate(&hits),
        });
    }
    Ok(rows)
}

/// `(label A, label B, n, seed, estimate, SE)` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label_a: String,
    pub label_b: String,
    pub n: usize,
    pub seed: u64,
    pub estimate: f64,
    pub std_error: f64,
}

impl ReportRow {
    pub fn new(
        label_a: impl Into<String>,
        label_b: impl Into<String>,
        e: &VolumeEstimate,
    ) -> ReportRow {
        ReportRow {
            label_a: label_a.into(),
            label_b: label_b.into(),
            n: e.n_samples,
            seed: e.seed,
            estimate: e.value,
            std_error: e.std_error,
        }
    }
}

/// Comma-separated report with a header line.
pub fn write_report(rows: &[ReportRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
