//! Sampled estimates of the constants that appear in the Lipschitz bound
//! for `W_{λ,β}` and in the λ/β thresholds. None of these are rigorous.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LocalStability, VectorField};
use crate::poly::Poly;

/// Uniform sample of the ball `B_r(0)` by rejection from the cube.
pub(crate) fn ball_samples(n: usize, r: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= r * r {
            out.push(x);
        }
    }
    out
}

/// Sampled `max ‖D^α f(x)‖₂` over `|α| ≤ 2` and `x ∈ B_R(0)`, inflated by 1%.
pub fn estimate_theta(f: &VectorField, radius: f64, samples: usize, seed: u64) -> f64 {
    let n = f.nvars();
    // Every partial derivative of order ≤ 2, as a vector of n component polys.
    let mut partials: Vec<Vec<Poly>> = vec![f.components().to_vec()];
    for i in 0..n {
        let di: Vec<Poly> = f.components().iter().map(|c| c.derivative(i)).collect();
        for j in i..n {
            partials.push(di.iter().map(|c| c.derivative(j)).collect());
        }
        partials.push(di);
    }
    let mut pts = ball_samples(n, radius, samples, seed);
    // Include points on the sphere, where polynomial growth peaks.
    pts.extend(
        ball_samples(n, radius, samples / 4 + 1, seed ^ 0x5eed)
            .into_iter()
            .map(|x| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                x.iter().map(|v| v * radius / r).collect::<Vec<_>>()
            }),
    );
    let mut theta = 0.0f64;
    for x in &pts {
        for vecpoly in &partials {
            let nrm = vecpoly
                .iter()
                .map(|p| p.eval_unchecked(x).powi(2))
                .sum::<f64>()
                .sqrt();
            theta = theta.max(nrm);
        }
    }
    theta * 1.01
}

/// `K = 2λ max{ 2βR^{2β−1}/θ, 2β(μη)^{2β−1}/(δ(2β−1) − θ) }`, or `None` when
/// the denominator is not positive.
pub fn lipschitz_constant(
    lambda: f64,
    beta: u32,
    theta: f64,
    mu: f64,
    eta: f64,
    delta: f64,
    radius: f64,
) -> Option<f64> {
    let b = beta as f64;
    let denom = delta * (2.0 * b - 1.0) - theta;
    if denom <= 0.0 {
        return None;
    }
    let first = 2.0 * b * radius.powf(2.0 * b - 1.0) / theta;
    let second = 2.0 * b * (mu * eta).powf(2.0 * b - 1.0) / denom;
    Some(2.0 * lambda * first.max(second))
}

/// Largest `|g(x) − g(y)| / ‖x − y‖` over the given pairs.
pub fn max_difference_quotient<G: Fn(&[f64]) -> f64>(g: G, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    pairs
        .iter()
        .map(|(x, y)| {
            let d = x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if d == 0.0 {
                0.0
            } else {
                (g(x) - g(y)).abs() / d
            }
        })
        .fold(0.0, f64::max)
}

/// Estimated constants and whether the λ/β thresholds hold for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub theta: f64,
    pub mu: Option<f64>,
    pub delta: Option<f64>,
    pub eta: f64,
    pub radius: f64,
    pub lambda: f64,
    pub beta: u32,
    /// `θ η^{−2β}`.
    pub lambda_threshold: f64,
    /// `θ / (2δ) + 1/2`.
    pub beta_threshold: Option<f64>,
    pub lambda_ok: bool,
    pub beta_ok: bool,
    pub lipschitz: Option<f64>,
    pub rigorous: bool,
}

impl TheoryReport {
    #[allow(clippy::too_many_arguments)]
    pub fn estimate(
        f: &VectorField,
        stability: &LocalStability,
        eta: f64,
        lambda: f64,
        beta: u32,
        radius: f64,
        samples: usize,
        seed: u64,
    ) -> TheoryReport {
        let theta = estimate_theta(f, radius, samples, seed);
        let lambda_threshold = theta * eta.powi(-2 * beta as i32);
        let beta_threshold = stability.delta.map(|d| theta / (2.0 * d) + 0.5);
        let lipschitz = match (stability.mu, stability.delta) {
            (Some(mu), Some(delta)) => {
                lipschitz_constant(lambda, beta, theta, mu, eta, delta, radius)
            }
            _ => None,
        };
        TheoryReport {
            theta,
            mu: stability.mu,
            delta: stability.delta,
            eta,
            radius,
            lambda,
            beta,
            lambda_threshold,
            beta_threshold,
            lambda_ok: lambda > lambda_threshold,
            beta_ok: beta_threshold.is_some_and(|t| beta as f64 > t),
            lipschitz,
            rigorous: false,
        }
    }
}
