//! Monte-Carlo check of the high-probability bound for SGD with subspace momentum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{param_layout, run_trajectory, ObjectiveSpec, TrajectorySetup};
use crate::analysis::{thm2_bound, Thm2Bound};
use crate::error::{Error, Result};
use crate::linalg::FrameKind;
use crate::noise_models::{NoiseDistribution, NoiseModel, NoisePattern};
use crate::optim::{Adaptive, Momentum, OptimizerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm2Config {
    /// Must be a quadratic so that `L` and `Δ₁` are known.
    pub objective: ObjectiveSpec,
    /// Norm of every noise vector. Each coordinate gets `±sigma/√d`
    /// (bounded) or `N(0, sigma²/d)` (Gaussian).
    pub sigma: f64,
    pub distribution: NoiseDistribution,
    pub delta1: f64,
    pub beta1: f64,
    pub steps: u64,
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub frame_kind: FrameKind,
    pub rank: usize,
    pub refresh_gap: u64,
}

impl Thm2Config {
    /// Unit-curvature quadratic with bounded noise of norm `sigma`.
    pub fn quadratic(dim: usize, sigma: f64, steps: u64, seeds: Vec<u64>) -> Self {
        Thm2Config {
            objective: ObjectiveSpec::Quadratic {
                dim,
                curvature: 1.0,
                lambda: None,
            },
            sigma,
            distribution: NoiseDistribution::Bounded,
            delta1: 1.0,
            beta1: 0.9,
            steps,
            delta: 0.1,
            seeds,
            frame_kind: FrameKind::Svd,
            rank: 10,
            refresh_gap: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm2Report {
    pub bound: Thm2Bound,
    /// `(1/T) Σ ‖∇f(x_t)‖²` per seed, in seed order.
    pub per_seed: Vec<f64>,
    pub violations: usize,
    pub n: usize,
    pub fraction: f64,
    /// `δ + 2√(δ(1−δ)/n)`.
    pub threshold: f64,
    pub passed: bool,
}

/// Runs every seed at `η*` and counts trajectories whose averaged squared
/// gradient norm exceeds the bound. Diverged trajectories count as violations.
pub fn verify_thm2(cfg: &Thm2Config) -> Result<Thm2Report> {
    if cfg.seeds.is_empty() || cfg.steps == 0 {
        return Err(Error::invalid("bound check needs seeds and steps >= 1"));
    }
    if !matches!(cfg.objective, ObjectiveSpec::Quadratic { .. }) {
        return Err(Error::invalid(
            "bound check needs a quadratic objective with known constants",
        ));
    }
    let objective = cfg.objective.build()?;
    let l = objective
        .smoothness()
        .ok_or_else(|| Error::invalid("smoothness constant unknown"))?;
    let bound = thm2_bound(
        cfg.delta1,
        cfg.sigma,
        l,
        cfg.beta1,
        cfg.steps as f64,
        cfg.delta,
    )?;

    let d = objective.dim();
    let per_coord = cfg.sigma / (d as f64).sqrt();
    let noise = NoiseModel {
        pattern: NoisePattern::Dense {
            sigma: vec![per_coord; d],
        },
        distribution: cfg.distribution,
    }
    .resolve(d)?;
    let layout = param_layout(&objective);
    let spec = OptimizerSpec::new(
        Momentum::Subspace {
            frame_kind: cfg.frame_kind,
            rank: cfg.rank,
            refresh_gap: cfg.refresh_gap,
            beta1: cfg.beta1,
            dampening: true,
        },
        Adaptive::None,
        bound.eta_star,
    );
    spec.validate()?;
    let setup = TrajectorySetup {
        objective: &objective,
        noise: &noise,
        layout: &layout,
        spec: &spec,
        steps: cfg.steps,
        record_every: 0,
        delta1: cfg.delta1,
    };
    let summaries = cfg
        .seeds
        .par_iter()
        .map(|&s| run_trajectory(&setup, s).map(|t| t.summary))
        .collect::<Result<Vec<_>>>()?;
    let per_seed: Vec<f64> = summaries.iter().map(|s| s.mean_grad_norm_sq).collect();
    let violations = summaries
        .iter()
        .filter(|s| s.diverged || s.mean_grad_norm_sq.is_nan() || s.mean_grad_norm_sq > bound.bound)
        .count();
    let n = summaries.len();
    let fraction = violations as f64 / n as f64;
    let threshold = cfg.delta + 2.0 * (cfg.delta * (1.0 - cfg.delta) / n as f64).sqrt();
    Ok(Thm2Report {
        bound,
        per_seed,
        violations,
        n,
        fraction,
        threshold,
        passed: fraction <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_has_no_violations() {
        for frame in [FrameKind::Svd, FrameKind::Identity, FrameKind::Zero] {
            let mut cfg = Thm2Config::quadratic(20, 0.0, 300, vec![1, 2, 3]);
            cfg.frame_kind = frame;
            cfg.rank = 5;
            let r = verify_thm2(&cfg).unwrap();
            assert_eq!(r.violations, 0, "{frame:?}");
            assert!(r.passed);
        }
    }

    #[test]
    fn identity_frame_satisfies_bound() {
        let mut cfg = Thm2Config::quadratic(20, 1.0, 1000, (0..8).collect());
        cfg.frame_kind = FrameKind::Identity;
        cfg.rank = 20;
        let r = verify_thm2(&cfg).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn rejects_non_quadratic() {
        let mut cfg = Thm2Config::quadratic(4, 1.0, 10, vec![0]);
        cfg.objective = ObjectiveSpec::Logistic {
            samples: 8,
            dim: 4,
            reg: 0.0,
            data_seed: 0,
        };
        assert!(verify_thm2(&cfg).is_err());
    }
}
