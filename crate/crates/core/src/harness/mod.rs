//! Experiment runner: objectives × noise × optimizer over many seeds.

mod manifest;
mod output;
mod sweep;
mod thm2;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::rng::derive_seed;
use crate::linalg::Matrix;
use crate::noise_models::{NoiseModel, Objective, ResolvedNoise};
use crate::optim::{Optimizer, OptimizerSpec, Overrides, ParamClass, ParamSpec, Preset, RunRecord};

pub use manifest::ShapeManifest;
pub use output::{format_f64, write_records_csv, write_records_json, OutputFormat, CSV_HEADER};
pub use sweep::{compare_rows, sweep_beta, Comparison, SweepConfig, SweepMethod, SweepRow};
pub use thm2::{verify_thm2, Thm2Config, Thm2Report};

/// Seed stream for objective-specific initial points.
const INIT_STREAM: u64 = 0x696e_6974;

/// Loss above which a trajectory counts as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `½ Σ λ_j x_j²` with `λ_j = curvature` unless `lambda` is given.
    Quadratic {
        dim: usize,
        #[serde(default = "default_curvature")]
        curvature: f64,
        #[serde(default)]
        lambda: Option<Vec<f64>>,
    },
    Logistic {
        samples: usize,
        dim: usize,
        #[serde(default)]
        reg: f64,
        #[serde(default)]
        data_seed: u64,
    },
    Mlp2 {
        samples: usize,
        inputs: usize,
        hidden: usize,
        outputs: usize,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_curvature() -> f64 {
    1.0
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Objective> {
        match self {
            ObjectiveSpec::Quadratic {
                dim,
                curvature,
                lambda,
            } => match lambda {
                Some(l) if l.len() != *dim => Err(Error::shape("quadratic lambda", dim, l.len())),
                Some(l) => Objective::quadratic(l.clone()),
                None => Objective::quadratic(vec![*curvature; *dim]),
            },
            ObjectiveSpec::Logistic {
                samples,
                dim,
                reg,
                data_seed,
            } => Objective::logistic_synthetic(*samples, *dim, *reg, *data_seed),
            ObjectiveSpec::Mlp2 {
                samples,
                inputs,
                hidden,
                outputs,
                data_seed,
            } => Objective::mlp2_synthetic(*samples, *inputs, *hidden, *outputs, *data_seed),
        }
    }
}

/// How an objective's flat parameter vector maps onto optimizer parameters.
pub fn param_layout(obj: &Objective) -> Vec<ParamSpec> {
    match obj {
        Objective::Mlp2 {
            hidden,
            inputs,
            targets,
        } => vec![
            ParamSpec::linear("w1", *hidden, inputs.cols()),
            ParamSpec::new("b1", *hidden, 1, ParamClass::Other),
            ParamSpec::linear("w2", targets.cols(), *hidden),
            ParamSpec::new("b2", targets.cols(), 1, ParamClass::Other),
        ],
        _ => vec![ParamSpec::linear("x", obj.dim(), 1)],
    }
}

/// Starting point. Quadratics start at `s·1` with `f(x₁) − f* = delta1`.
pub fn initial_point(obj: &Objective, delta1: f64, seed: u64) -> Result<Vec<f64>> {
    match obj {
        Objective::Quadratic { lambda } => {
            if !(delta1 >= 0.0 && delta1.is_finite()) {
                return Err(Error::invalid(format!(
                    "delta1 = {delta1} must be nonnegative"
                )));
            }
            let s = (2.0 * delta1 / lambda.iter().sum::<f64>()).sqrt();
            Ok(vec![s; lambda.len()])
        }
        _ => obj.init_point(derive_seed(seed, INIT_STREAM)),
    }
}

/// Preset plus overrides; the preset accepts any spelling that `Preset` parses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerChoice {
    pub preset: Preset,
    #[serde(default)]
    pub overrides: Overrides,
}

impl OptimizerChoice {
    pub fn spec(&self, total_steps: u64, seed: u64) -> Result<OptimizerSpec> {
        let mut spec = self.preset.spec();
        spec.total_steps = Some(total_steps);
        spec.seed = seed;
        spec.apply_overrides(&self.overrides)?;
        Ok(spec)
    }
}

fn default_record_every() -> u64 {
    1
}

fn default_delta1() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    #[serde(default = "NoiseModel::none")]
    pub noise: NoiseModel,
    pub optimizer: OptimizerChoice,
    pub steps: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record every n-th step; `0` keeps summaries only.
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Initial gap for quadratic objectives.
    #[serde(default = "default_delta1")]
    pub delta1: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        self.optimizer.spec(self.steps, 0)?;
        Ok(())
    }
}

/// End-of-trajectory statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub seed: u64,
    pub steps_completed: u64,
    /// `(1/t) Σ ‖∇f(x_s)‖²` over completed steps.
    pub mean_grad_norm_sq: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub diverged: bool,
    pub state_elems: usize,
    pub frame_elems: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<RunRecord>,
    pub summary: TrajectorySummary,
}

/// Everything a trajectory needs apart from its seed.
pub struct TrajectorySetup<'a> {
    pub objective: &'a Objective,
    pub noise: &'a ResolvedNoise,
    pub layout: &'a [ParamSpec],
    pub spec: &'a OptimizerSpec,
    pub steps: u64,
    pub record_every: u64,
    pub delta1: f64,
}

fn split(flat: &[f64], layout: &[ParamSpec]) -> Vec<Matrix> {
    let mut offset = 0;
    layout
        .iter()
        .map(|p| {
            let n = p.numel();
            let m = Matrix::from_vec(p.rows, p.cols, flat[offset..offset + n].to_vec())
                .expect("layout matches");
            offset += n;
            m
        })
        .collect()
}

fn flatten_into(params: &[Matrix], out: &mut Vec<f64>) {
    out.clear();
    for p in params {
        out.extend_from_slice(p.as_slice());
    }
}

/// Runs one seeded trajectory. Divergence ends the loop early and is
/// reported in the summary; configuration errors are returned.
pub fn run_trajectory(setup: &TrajectorySetup<'_>, seed: u64) -> Result<Trajectory> {
    let mut spec = setup.spec.clone();
    spec.seed = seed;
    let mut opt = Optimizer::new(spec, setup.layout.to_vec())?;
    let sizes = opt.state_size();
    let x0 = initial_point(setup.objective, setup.delta1, seed)?;
    let mut params = split(&x0, setup.layout);
    let mut flat = x0;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut sum_gns = 0.0;
    let mut completed = 0u64;
    let mut diverged = false;
    let initial_loss = setup.objective.value(&flat)?;
    let mut last_loss = initial_loss;

    for t in 1..=setup.steps {
        let loss = setup.objective.value(&flat)?;
        let mut grad = setup.objective.grad(&flat)?;
        let gns: f64 = grad.iter().map(|g| g * g).sum();
        if !loss.is_finite() || !gns.is_finite() || loss > DIVERGENCE_LOSS {
            diverged = true;
            break;
        }
        last_loss = loss;
        setup.noise.add_to(&mut grad, seed, t)?;
        let grads = split(&grad, setup.layout);
        let info = match opt.step(&mut params, &grads, t) {
            Ok(info) => info,
            Err(Error::NonFiniteGradient { .. } | Error::Numeric(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        sum_gns += gns;
        completed = t;
        if setup.record_every > 0 && (t - 1) % setup.record_every == 0 {
            records.push(RunRecord {
                step: t,
                seed,
                loss,
                grad_norm_sq: gns,
                lr: info.lr,
                state_elems: sizes.total,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        flatten_into(&params, &mut flat);
    }
    if !diverged {
        let loss = setup.objective.value(&flat)?;
        if loss.is_finite() && loss <= DIVERGENCE_LOSS {
            last_loss = loss;
        } else {
            diverged = true;
        }
    }
    Ok(Trajectory {
        records,
        summary: TrajectorySummary {
            seed,
            steps_completed: completed,
            mean_grad_norm_sq: if completed > 0 {
                sum_gns / completed as f64
            } else {
                f64::NAN
            },
            initial_loss,
            final_loss: last_loss,
            diverged,
            state_elems: sizes.total,
            frame_elems: sizes.frame,
        },
    })
}

/// Mean and standard error of the per-seed metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn seed_stats(values: &[f64]) -> SeedStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    SeedStats { mean, stderr, n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<TrajectorySummary>,
    /// Across seeds, of `mean_grad_norm_sq`.
    pub stats: SeedStats,
    pub diverged: bool,
}

/// Runs every seed of `config` in parallel; results keep seed order.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let objective = config.objective.build()?;
    let noise = config.noise.resolve(objective.dim())?;
    let layout = param_layout(&objective);
    let spec = config.optimizer.spec(config.steps, 0)?;
    let setup = TrajectorySetup {
        objective: &objective,
        noise: &noise,
        layout: &layout,
        spec: &spec,
        steps: config.steps,
        record_every: config.record_every,
        delta1: config.delta1,
    };
    let trajectories: Vec<Trajectory> = config
        .seeds
        .par_iter()
        .map(|&seed| run_trajectory(&setup, seed))
        .collect::<Result<_>>()?;
    let summaries: Vec<TrajectorySummary> =
        trajectories.iter().map(|t| t.summary.clone()).collect();
    let diverged = summaries.iter().any(|s| s.diverged);
    let stats = seed_stats(
        &summaries
            .iter()
            .map(|s| s.mean_grad_norm_sq)
            .collect::<Vec<_>>(),
    );
    let records = trajectories.into_iter().flat_map(|t| t.records).collect();
    Ok(RunOutput {
        records,
        summaries,
        stats,
        diverged,
    })
}
