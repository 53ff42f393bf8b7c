//! Coordinate vs norm vs subset-norm step sizes under varying noise density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{param_layout, run_trajectory, seed_stats, SeedStats, TrajectorySetup};
use crate::error::{Error, Result};
use crate::noise_models::{density_count, NoiseDistribution, NoiseModel, Objective, Placement};
use crate::optim::{Adaptive, Momentum, OptimizerSpec};
use crate::partition::PartitionRule;

/// Grouping compared in a sweep; all use AdaGrad-style accumulation without momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum SweepMethod {
    Coordinate,
    Norm,
    /// Consecutive blocks of a fixed size.
    SubsetSize {
        size: usize,
    },
    /// Equal blocks sized so the `ceil(d^β)` contiguous noisy coordinates
    /// fill exactly `k` of them (size `ceil(d^β) / k`).
    NoisySubsets {
        k: usize,
    },
}

impl SweepMethod {
    pub fn label(&self) -> String {
        match self {
            SweepMethod::Coordinate => "coordinate".into(),
            SweepMethod::Norm => "norm".into(),
            SweepMethod::SubsetSize { size } => format!("subset_size_{size}"),
            SweepMethod::NoisySubsets { k } => format!("noisy_subsets_{k}"),
        }
    }

    /// Block size used for dimension `d` at density `beta`.
    pub fn subset_size(&self, d: usize, beta: f64) -> Result<usize> {
        let size = match *self {
            SweepMethod::Coordinate => 1,
            SweepMethod::Norm => d,
            SweepMethod::SubsetSize { size } => size,
            SweepMethod::NoisySubsets { k } => {
                let noisy = density_count(d, beta);
                if k == 0 || noisy % k != 0 {
                    return Err(Error::invalid(format!(
                        "{noisy} noisy coordinates cannot be split into {k} equal subsets"
                    )));
                }
                noisy / k
            }
        };
        if size == 0 || d % size != 0 {
            return Err(Error::invalid(format!(
                "subset size {size} does not divide d = {d}"
            )));
        }
        Ok(size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dim: usize,
    pub betas: Vec<f64>,
    pub methods: Vec<SweepMethod>,
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub lr: f64,
    pub b0: f64,
    /// Noise level `α` of each noisy coordinate.
    pub magnitude: f64,
    pub distribution: NoiseDistribution,
    pub curvature: f64,
    pub delta1: f64,
}

impl SweepConfig {
    /// Quadratic `½‖x‖²` with contiguous Gaussian density noise.
    pub fn standard(
        dim: usize,
        betas: Vec<f64>,
        methods: Vec<SweepMethod>,
        steps: u64,
        seeds: Vec<u64>,
    ) -> Self {
        SweepConfig {
            dim,
            betas,
            methods,
            steps,
            seeds,
            lr: 0.5,
            b0: 1e-6,
            magnitude: 1.0,
            distribution: NoiseDistribution::Gaussian,
            curvature: 1.0,
            delta1: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub method: String,
    pub subset_size: usize,
    pub subsets: usize,
    /// Of `(1/T) Σ ‖∇f(x_t)‖²` across seeds.
    pub stats: SeedStats,
    pub diverged: usize,
}

/// Mean and stderr of the averaged squared gradient norm for every
/// `(β, method)` pair, in input order.
pub fn sweep_beta(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.seeds.is_empty() || cfg.steps == 0 || cfg.dim == 0 {
        return Err(Error::invalid("sweep needs seeds, steps >= 1 and dim >= 1"));
    }
    let objective = Objective::quadratic(vec![cfg.curvature; cfg.dim])?;
    let layout = param_layout(&objective);
    let mut jobs = Vec::new();
    for &beta in &cfg.betas {
        for method in &cfg.methods {
            let size = method.subset_size(cfg.dim, beta)?;
            jobs.push((beta, *method, size));
        }
    }
    jobs.par_iter()
        .map(|&(beta, method, size)| {
            let noise =
                NoiseModel::density(beta, cfg.magnitude, Placement::Contiguous, cfg.distribution)
                    .resolve(cfg.dim)?;
            let adaptive = match method {
                SweepMethod::Coordinate => Adaptive::AdaGradCoordinate {
                    b0: cfg.b0,
                    eps: 0.0,
                },
                SweepMethod::Norm => Adaptive::AdaGradNorm {
                    b0: cfg.b0,
                    eps: 0.0,
                },
                _ => Adaptive::AdaGradSubsetNorm {
                    partition: PartitionRule::Equipartition { k: size },
                    b0: cfg.b0,
                    eps: 0.0,
                },
            };
            let spec = OptimizerSpec::new(Momentum::None, adaptive, cfg.lr);
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
            let values: Vec<f64> = summaries.iter().map(|s| s.mean_grad_norm_sq).collect();
            Ok(SweepRow {
                beta,
                method: method.label(),
                subset_size: size,
                subsets: cfg.dim / size,
                stats: seed_stats(&values),
                diverged: summaries.iter().filter(|s| s.diverged).count(),
            })
        })
        .collect()
}

/// Outcome of checking that one row is at most another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Expected order with disjoint ±1 stderr intervals.
    Pass,
    /// Intervals overlap.
    Inconclusive,
    /// Reversed order with disjoint intervals.
    Fail,
}

/// Checks `better.mean ≤ worse.mean` using ±1 stderr intervals.
pub fn compare_rows(better: &SweepRow, worse: &SweepRow) -> Comparison {
    let (a, b) = (better.stats, worse.stats);
    if a.mean + a.stderr < b.mean - b.stderr {
        Comparison::Pass
    } else if a.mean - a.stderr > b.mean + b.stderr {
        Comparison::Fail
    } else {
        Comparison::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_sizes() {
        assert_eq!(
            SweepMethod::NoisySubsets { k: 256 }
                .subset_size(1024, 1.0)
                .unwrap(),
            4
        );
        assert_eq!(SweepMethod::Norm.subset_size(1024, 0.0).unwrap(), 1024);
        assert!(SweepMethod::NoisySubsets { k: 3 }
            .subset_size(1024, 1.0)
            .is_err());
        assert!(SweepMethod::SubsetSize { size: 3 }
            .subset_size(1024, 1.0)
            .is_err());
    }

    #[test]
    fn single_method_sweep_is_repeated_run() {
        let cfg = SweepConfig::standard(16, vec![0.5], vec![SweepMethod::Norm], 50, vec![1, 2]);
        let rows = sweep_beta(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].stats.n, 2);
        assert_eq!(rows, sweep_beta(&cfg).unwrap());
    }

    fn row(mean: f64, stderr: f64) -> SweepRow {
        SweepRow {
            beta: 0.0,
            method: String::new(),
            subset_size: 1,
            subsets: 1,
            stats: SeedStats {
                mean,
                stderr,
                n: 10,
            },
            diverged: 0,
        }
    }

    #[test]
    fn comparison_outcomes() {
        assert_eq!(
            compare_rows(&row(1.0, 0.1), &row(2.0, 0.1)),
            Comparison::Pass
        );
        assert_eq!(
            compare_rows(&row(1.0, 0.6), &row(2.0, 0.6)),
            Comparison::Inconclusive
        );
        assert_eq!(
            compare_rows(&row(3.0, 0.1), &row(2.0, 0.1)),
            Comparison::Fail
        );
    }
}
