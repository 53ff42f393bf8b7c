//! Synthetic objectives and noisy gradient oracles.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::rng::{derive_seed, gaussian_matrix, rng_from_seed};
use crate::linalg::Matrix;

/// Stream offset for per-step noise draws, kept apart from data streams.
const NOISE_STREAM: u64 = 0x6e6f_6973_6500_0000;

/// A smooth test objective over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Objective {
    /// `f(x) = ½ Σ λ_j x_j²`.
    Quadratic { lambda: Vec<f64> },
    /// Mean logistic loss with labels in `{−1, +1}` plus `reg/2 · ‖x‖²`.
    Logistic {
        features: Matrix,
        labels: Vec<f64>,
        reg: f64,
    },
    /// One tanh hidden layer, squared loss `1/(2n) Σ ‖ŷ − y‖²`.
    /// Parameters are `[W1 (h×i), b1 (h), W2 (o×h), b2 (o)]` flattened row-major.
    Mlp2 {
        hidden: usize,
        inputs: Matrix,
        targets: Matrix,
    },
}

impl Objective {
    pub fn quadratic(lambda: Vec<f64>) -> Result<Objective> {
        if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(
                "quadratic curvatures must be positive and finite",
            ));
        }
        Ok(Objective::Quadratic { lambda })
    }

    /// Gaussian features and labels from a random linear separator with 10% label flips.
    pub fn logistic_synthetic(n: usize, d: usize, reg: f64, seed: u64) -> Result<Objective> {
        if n == 0 || d == 0 || reg < 0.0 {
            return Err(Error::invalid(
                "logistic problem needs n, d >= 1 and reg >= 0",
            ));
        }
        let mut rng = rng_from_seed(seed);
        let features = gaussian_matrix(n, d, &mut rng);
        let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let labels = (0..n)
            .map(|i| {
                let margin: f64 = features.row(i).iter().zip(&w).map(|(a, b)| a * b).sum();
                let y = if margin >= 0.0 { 1.0 } else { -1.0 };
                if rng.random::<f64>() < 0.1 {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Ok(Objective::Logistic {
            features,
            labels,
            reg,
        })
    }

    /// Regression targets produced by a random teacher network of the same shape.
    pub fn mlp2_synthetic(
        n: usize,
        d_in: usize,
        hidden: usize,
        d_out: usize,
        seed: u64,
    ) -> Result<Objective> {
        if n == 0 || d_in == 0 || hidden == 0 || d_out == 0 {
            return Err(Error::invalid("MLP dimensions must be positive"));
        }
        let mut rng = rng_from_seed(seed);
        let inputs = gaussian_matrix(n, d_in, &mut rng);
        let placeholder = Objective::Mlp2 {
            hidden,
            inputs: inputs.clone(),
            targets: Matrix::zeros(n, d_out),
        };
        let teacher = placeholder.init_point(derive_seed(seed, 1))?;
        let (w1, b1, w2, b2) = mlp_split(&teacher, d_in, hidden, d_out);
        let targets = Matrix::from_fn(n, d_out, |s, o| {
            let x = inputs.row(s);
            let h: Vec<f64> = (0..hidden)
                .map(|k| (b1[k] + (0..d_in).map(|i| w1[k * d_in + i] * x[i]).sum::<f64>()).tanh())
                .collect();
            b2[o] + (0..hidden).map(|k| w2[o * hidden + k] * h[k]).sum::<f64>()
        });
        Ok(Objective::Mlp2 {
            hidden,
            inputs,
            targets,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic { lambda } => lambda.len(),
            Objective::Logistic { features, .. } => features.cols(),
            Objective::Mlp2 {
                hidden,
                inputs,
                targets,
            } => {
                let (i, o) = (inputs.cols(), targets.cols());
                hidden * i + hidden + o * hidden + o
            }
        }
    }

    /// Smoothness constant when known (exact for quadratics, an upper
    /// bound for logistic regression).
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            Objective::Quadratic { lambda } => Some(lambda.iter().copied().fold(0.0, f64::max)),
            Objective::Logistic { features, reg, .. } => {
                let sv = features.to_nalgebra().singular_values();
                let op = sv.iter().copied().fold(0.0, f64::max);
                Some(op * op / (4.0 * features.rows() as f64) + reg)
            }
            Objective::Mlp2 { .. } => None,
        }
    }

    /// A lower bound on `f`.
    pub fn f_star(&self) -> Option<f64> {
        Some(0.0)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape("objective", self.dim(), x.len()));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            Objective::Quadratic { lambda } => {
                0.5 * lambda.iter().zip(x).map(|(l, v)| l * v * v).sum::<f64>()
            }
            Objective::Logistic {
                features,
                labels,
                reg,
            } => {
                let n = features.rows() as f64;
                let loss: f64 = (0..features.rows())
                    .map(|i| {
                        let z = labels[i] * dot(features.row(i), x);
                        softplus(-z)
                    })
                    .sum();
                loss / n + 0.5 * reg * dot(x, x)
            }
            Objective::Mlp2 {
                hidden,
                inputs,
                targets,
            } => mlp_forward_backward(x, *hidden, inputs, targets, false).0,
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(match self {
            Objective::Quadratic { lambda } => lambda.iter().zip(x).map(|(l, v)| l * v).collect(),
            Objective::Logistic {
                features,
                labels,
                reg,
            } => {
                let n = features.rows() as f64;
                let mut g: Vec<f64> = x.iter().map(|v| reg * v).collect();
                for (i, &y) in labels.iter().enumerate() {
                    let a = features.row(i);
                    let z = y * dot(a, x);
                    // d/dz softplus(−z) = −sigmoid(−z)
                    let coeff = -y * sigmoid(-z) / n;
                    for (gj, aj) in g.iter_mut().zip(a) {
                        *gj += coeff * aj;
                    }
                }
                g
            }
            Objective::Mlp2 {
                hidden,
                inputs,
                targets,
            } => mlp_forward_backward(x, *hidden, inputs, targets, true).1,
        })
    }

    /// Seeded starting point: uniform `±1/sqrt(fan_in)` for the MLP, zeros otherwise.
    pub fn init_point(&self, seed: u64) -> Result<Vec<f64>> {
        match self {
            Objective::Mlp2 {
                hidden,
                inputs,
                targets,
            } => {
                let (d_in, d_out) = (inputs.cols(), targets.cols());
                let mut rng = rng_from_seed(seed);
                let mut uniform = |fan_in: usize, count: usize| -> Vec<f64> {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..count)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect()
                };
                let mut x = uniform(d_in, hidden * d_in);
                x.extend(uniform(d_in, *hidden));
                x.extend(uniform(*hidden, d_out * hidden));
                x.extend(uniform(*hidden, d_out));
                Ok(x)
            }
            _ => Ok(vec![0.0; self.dim()]),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn mlp_split(
    x: &[f64],
    d_in: usize,
    hidden: usize,
    d_out: usize,
) -> (&[f64], &[f64], &[f64], &[f64]) {
    let (w1, rest) = x.split_at(hidden * d_in);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(d_out * hidden);
    (w1, b1, w2, b2)
}

fn mlp_forward_backward(
    x: &[f64],
    hidden: usize,
    inputs: &Matrix,
    targets: &Matrix,
    backward: bool,
) -> (f64, Vec<f64>) {
    let (n, d_in, d_out) = (inputs.rows(), inputs.cols(), targets.cols());
    let (w1, b1, w2, b2) = mlp_split(x, d_in, hidden, d_out);
    let mut grad = if backward {
        vec![0.0; x.len()]
    } else {
        Vec::new()
    };
    let mut loss = 0.0;
    let mut h = vec![0.0; hidden];
    let mut err = vec![0.0; d_out];
    let scale = 1.0 / n as f64;
    for s in 0..n {
        let xi = inputs.row(s);
        for k in 0..hidden {
            h[k] = (b1[k] + dot(&w1[k * d_in..(k + 1) * d_in], xi)).tanh();
        }
        for o in 0..d_out {
            err[o] = b2[o] + dot(&w2[o * hidden..(o + 1) * hidden], &h) - targets.get(s, o);
            loss += 0.5 * err[o] * err[o] * scale;
        }
        if !backward {
            continue;
        }
        let (gw1, rest) = grad.split_at_mut(hidden * d_in);
        let (gb1, rest) = rest.split_at_mut(hidden);
        let (gw2, gb2) = rest.split_at_mut(d_out * hidden);
        for o in 0..d_out {
            let e = err[o] * scale;
            gb2[o] += e;
            for k in 0..hidden {
                gw2[o * hidden + k] += e * h[k];
            }
        }
        for k in 0..hidden {
            let back: f64 = (0..d_out)
                .map(|o| err[o] * scale * w2[o * hidden + k])
                .sum();
            let pre = back * (1.0 - h[k] * h[k]);
            gb1[k] += pre;
            for i in 0..d_in {
                gw1[k * d_in + i] += pre * xi[i];
            }
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Placement {
    /// The first `count` coordinates.
    Contiguous,
    /// A seeded uniform subset.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum NoisePattern {
    /// Explicit per-coordinate levels.
    Dense { sigma: Vec<f64> },
    /// `ceil(d^β)` coordinates at level `magnitude`, the rest noiseless.
    Density {
        beta: f64,
        magnitude: f64,
        placement: Placement,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// `σ_j · Z` with `Z` standard normal.
    Gaussian,
    /// `±σ_j` with equal probability.
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub pattern: NoisePattern,
    pub distribution: NoiseDistribution,
}

/// `ceil(d^β)` clamped to `[1, d]`, treating values within `1e-9` of an
/// integer as that integer so `1024^0.8 = 256` is not pushed to 257.
pub fn density_count(d: usize, beta: f64) -> usize {
    let raw = (d as f64).powf(beta);
    let nearest = raw.round();
    let count = if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (count as usize).clamp(1, d.max(1))
}

impl NoiseModel {
    pub fn none() -> NoiseModel {
        NoiseModel {
            pattern: NoisePattern::Dense { sigma: Vec::new() },
            distribution: NoiseDistribution::Gaussian,
        }
    }

    pub fn gaussian(sigma: Vec<f64>) -> NoiseModel {
        NoiseModel {
            pattern: NoisePattern::Dense { sigma },
            distribution: NoiseDistribution::Gaussian,
        }
    }

    pub fn density(
        beta: f64,
        magnitude: f64,
        placement: Placement,
        distribution: NoiseDistribution,
    ) -> NoiseModel {
        NoiseModel {
            pattern: NoisePattern::Density {
                beta,
                magnitude,
                placement,
            },
            distribution,
        }
    }

    /// Per-coordinate levels for dimension `d`. An empty dense vector means no noise.
    pub fn sigmas(&self, d: usize) -> Result<Vec<f64>> {
        match &self.pattern {
            NoisePattern::Dense { sigma } if sigma.is_empty() => Ok(vec![0.0; d]),
            NoisePattern::Dense { sigma } => {
                if sigma.len() != d {
                    return Err(Error::shape("noise sigma", d, sigma.len()));
                }
                if sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return Err(Error::invalid(
                        "noise levels must be nonnegative and finite",
                    ));
                }
                Ok(sigma.clone())
            }
            NoisePattern::Density {
                beta,
                magnitude,
                placement,
            } => {
                if !(0.0..=1.0).contains(beta) {
                    return Err(Error::invalid(format!(
                        "density rate beta = {beta} must lie in [0, 1]"
                    )));
                }
                if !(*magnitude >= 0.0 && magnitude.is_finite()) {
                    return Err(Error::invalid("noise magnitude must be nonnegative"));
                }
                let count = density_count(d, *beta);
                let mut sigma = vec![0.0; d];
                match placement {
                    Placement::Contiguous => sigma[..count].fill(*magnitude),
                    Placement::Random { seed } => {
                        let mut rng = rng_from_seed(*seed);
                        for j in rand::seq::index::sample(&mut rng, d, count) {
                            sigma[j] = *magnitude;
                        }
                    }
                }
                Ok(sigma)
            }
        }
    }

    pub fn resolve(&self, d: usize) -> Result<ResolvedNoise> {
        let sigma = self.sigmas(d)?;
        let active = sigma
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(ResolvedNoise {
            sigma,
            active,
            distribution: self.distribution,
        })
    }
}

/// A noise model with its per-coordinate levels fixed for one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedNoise {
    sigma: Vec<f64>,
    active: Vec<usize>,
    distribution: NoiseDistribution,
}

impl ResolvedNoise {
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `‖σ‖₂`.
    pub fn norm(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Adds the draw for `(seed, t)` to `g`.
    pub fn add_to(&self, g: &mut [f64], seed: u64, t: u64) -> Result<()> {
        if g.len() != self.sigma.len() {
            return Err(Error::shape("noise sample", self.sigma.len(), g.len()));
        }
        if self.active.is_empty() {
            return Ok(());
        }
        let mut rng = rng_from_seed(derive_seed(seed ^ NOISE_STREAM, t));
        for &j in &self.active {
            let s = self.sigma[j];
            g[j] += match self.distribution {
                NoiseDistribution::Gaussian => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    s * z
                }
                NoiseDistribution::Bounded => {
                    if rng.random::<bool>() {
                        s
                    } else {
                        -s
                    }
                }
            };
        }
        Ok(())
    }

    pub fn sample(&self, seed: u64, t: u64) -> Vec<f64> {
        let mut g = vec![0.0; self.sigma.len()];
        self.add_to(&mut g, seed, t).expect("length matches");
        g
    }
}

/// `∇f(x) + ξ_t`, deterministic in `(seed, t)`.
pub fn stoch_grad(
    obj: &Objective,
    noise: &NoiseModel,
    x: &[f64],
    seed: u64,
    t: u64,
) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "stochastic gradient requested at a non-finite point".into(),
        ));
    }
    let mut g = obj.grad(x)?;
    noise.resolve(g.len())?.add_to(&mut g, seed, t)?;
    Ok(g)
}

/// Fewest samples accepted by [`verify_subgaussian`].
pub const MIN_SUBGAUSSIAN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaCheck {
    pub lambda: f64,
    /// Monte-Carlo `E[exp(λ²ξ²)]`.
    pub empirical: f64,
    /// `exp(λ²σ²)`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgaussianCheck {
    pub sigma: f64,
    pub tolerance: f64,
    pub checks: Vec<LambdaCheck>,
    pub passed: bool,
}

/// Monte-Carlo `E[exp(λ²ξ²)]`.
pub fn empirical_mgf(samples: &[f64], lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    samples.iter().map(|x| (l2 * x * x).exp()).sum::<f64>() / samples.len() as f64
}

/// Smallest proxy `s` with `E[exp(λ²ξ²)] ≤ exp(λ²s²)` at this `λ`.
pub fn fitted_proxy(samples: &[f64], lambda: f64) -> f64 {
    (empirical_mgf(samples, lambda).ln() / (lambda * lambda))
        .max(0.0)
        .sqrt()
}

/// Checks the sub-gaussian moment condition with proxy `sigma` at
/// `λ ∈ {0.25, 0.5, 1}/σ`, allowing the empirical side to exceed the bound
/// by a relative `tolerance`. With `sigma = 0` the samples must be zero.
pub fn verify_subgaussian(samples: &[f64], sigma: f64, tolerance: f64) -> Result<SubgaussianCheck> {
    if samples.len() < MIN_SUBGAUSSIAN_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SUBGAUSSIAN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || tolerance < 0.0 {
        return Err(Error::invalid("sigma and tolerance must be nonnegative"));
    }
    let unit = if sigma > 0.0 { 1.0 / sigma } else { 1.0 };
    let checks: Vec<LambdaCheck> = [0.25, 0.5, 1.0]
        .iter()
        .map(|f| {
            let lambda = f * unit;
            let empirical = empirical_mgf(samples, lambda);
            let bound = (lambda * lambda * sigma * sigma).exp();
            LambdaCheck {
                lambda,
                empirical,
                bound,
                holds: empirical.is_finite() && empirical <= bound * (1.0 + tolerance),
            }
        })
        .collect();
    Ok(SubgaussianCheck {
        sigma,
        tolerance,
        passed: checks.iter().all(|c| c.holds),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_gradient_by_hand() {
        let q = Objective::quadratic(vec![2.0, 2.0]).unwrap();
        let g = stoch_grad(&q, &NoiseModel::none(), &[1.0, 1.0], 0, 1).unwrap();
        assert_eq!(g, vec![2.0, 2.0]);
        assert_eq!(q.smoothness(), Some(2.0));
        assert_eq!(q.value(&[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn density_counts() {
        assert_eq!(density_count(100, 0.0), 1);
        assert_eq!(density_count(100, 0.5), 10);
        assert_eq!(density_count(1024, 0.8), 256);
        assert_eq!(density_count(10_000, 0.5), 100);
        assert_eq!(density_count(100, 1.0), 100);
        assert_eq!(density_count(10, 0.3), 2);
    }

    #[test]
    fn density_pattern_placement() {
        let m = NoiseModel::density(0.5, 2.0, Placement::Contiguous, NoiseDistribution::Gaussian);
        let s = m.sigmas(100).unwrap();
        assert!(s[..10].iter().all(|&v| v == 2.0) && s[10..].iter().all(|&v| v == 0.0));
        let r = NoiseModel::density(
            0.5,
            2.0,
            Placement::Random { seed: 3 },
            NoiseDistribution::Gaussian,
        );
        assert_eq!(
            r.sigmas(100).unwrap().iter().filter(|&&v| v > 0.0).count(),
            10
        );
    }

    #[test]
    fn draws_are_deterministic() {
        let q = Objective::quadratic(vec![1.0; 5]).unwrap();
        let m = NoiseModel::gaussian(vec![1.0; 5]);
        let a = stoch_grad(&q, &m, &[0.0; 5], 7, 3).unwrap();
        assert_eq!(a, stoch_grad(&q, &m, &[0.0; 5], 7, 3).unwrap());
        assert_ne!(a, stoch_grad(&q, &m, &[0.0; 5], 7, 4).unwrap());
        assert_ne!(a, stoch_grad(&q, &m, &[0.0; 5], 8, 3).unwrap());
    }

    #[test]
    fn bounded_noise_is_rademacher() {
        let m = NoiseModel {
            pattern: NoisePattern::Dense {
                sigma: vec![0.5; 3],
            },
            distribution: NoiseDistribution::Bounded,
        };
        let r = m.resolve(3).unwrap();
        for t in 1..50 {
            assert!(r.sample(1, t).iter().all(|v| v.abs() == 0.5));
        }
    }

    fn finite_diff(obj: &Objective, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|j| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[j] += h;
                m[j] -= h;
                (obj.value(&p).unwrap() - obj.value(&m).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let obj = Objective::logistic_synthetic(30, 5, 0.01, 2).unwrap();
        let x: Vec<f64> = (0..5).map(|j| 0.3 * j as f64 - 0.5).collect();
        let g = obj.grad(&x).unwrap();
        for (a, b) in g.iter().zip(finite_diff(&obj, &x)) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        let l = obj.smoothness().unwrap();
        assert!(l > 0.01);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let obj = Objective::mlp2_synthetic(12, 3, 4, 2, 5).unwrap();
        assert_eq!(obj.dim(), 4 * 3 + 4 + 2 * 4 + 2);
        let x = obj.init_point(9).unwrap();
        let g = obj.grad(&x).unwrap();
        for (a, b) in g.iter().zip(finite_diff(&obj, &x)) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn subgaussian_zero_noise() {
        let check = verify_subgaussian(&[0.0; 1000], 0.0, 0.0).unwrap();
        assert!(check.passed);
        assert!(check
            .checks
            .iter()
            .all(|c| c.empirical == 1.0 && c.bound == 1.0));
        assert!(verify_subgaussian(&[0.0; 999], 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_gradient_is_lipschitz(
            x in proptest::collection::vec(-10.0f64..10.0, 6),
            y in proptest::collection::vec(-10.0f64..10.0, 6),
            lambda in proptest::collection::vec(0.01f64..5.0, 6),
        ) {
            let q = Objective::quadratic(lambda).unwrap();
            let l = q.smoothness().unwrap();
            let gx = q.grad(&x).unwrap();
            let gy = q.grad(&y).unwrap();
            let lhs: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let rhs: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(lhs <= l * rhs * (1.0 + 1e-12));
        }
    }
}
