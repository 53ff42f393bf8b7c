use std::borrow::Cow;

use rayon::prelude::*;

use super::accounting::{plan, AdaptivePlan, MomentumPlan, ParamStateSize, StateSize};
use super::spec::OptimizerSpec;
use super::ParamSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::subsetnorm::{AccumulationMode, SnReduction, SubsetNormState};
use crate::subspace::{GaloreState, SubspaceMomentumState};

/// Below this many total elements the per-parameter loop stays sequential.
const PARALLEL_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone)]
enum MomentumState {
    None,
    Ema {
        buf: Matrix,
        beta1: f64,
        dampening: bool,
    },
    Subspace(SubspaceMomentumState),
    Galore(GaloreState),
}

#[derive(Debug, Clone)]
struct AdaptiveState {
    sn: SubsetNormState,
    eps: f64,
}

#[derive(Debug, Clone)]
struct ParamState {
    rows: usize,
    cols: usize,
    transposed: bool,
    momentum: MomentumState,
    adaptive: Option<AdaptiveState>,
}

/// Diagnostics of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub lr: f64,
    /// Squared global norm of the incoming gradients, before clipping.
    pub grad_norm_sq: f64,
    /// Factor applied by clipping (1 when inactive).
    pub clip_scale: f64,
}

/// Scales `grads` jointly so their concatenated norm is at most `max_norm`.
/// Returns the pre-clip squared norm and the scale applied.
pub fn global_clip(grads: &mut [Matrix], max_norm: f64) -> (f64, f64) {
    let norm_sq: f64 = grads.iter().map(Matrix::frobenius_norm_sq).sum();
    let norm = norm_sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
        }
        (norm_sq, scale)
    } else {
        (norm_sq, 1.0)
    }
}

pub struct Optimizer {
    spec: OptimizerSpec,
    params: Vec<ParamSpec>,
    states: Vec<ParamState>,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec, params: Vec<ParamSpec>) -> Result<Self> {
        spec.validate()?;
        let mut states = Vec::with_capacity(params.len());
        for (i, p) in params.iter().enumerate() {
            let plan = plan(&spec, i, p)?;
            let momentum = match plan.momentum {
                MomentumPlan::None => MomentumState::None,
                MomentumPlan::Ema { beta1, dampening } => MomentumState::Ema {
                    buf: Matrix::zeros(p.rows, p.cols),
                    beta1,
                    dampening,
                },
                MomentumPlan::Subspace {
                    config,
                    ambient,
                    other,
                } => MomentumState::Subspace(SubspaceMomentumState::new(config, ambient, other)?),
                MomentumPlan::Galore {
                    config,
                    ambient,
                    other,
                } => MomentumState::Galore(GaloreState::new(config, ambient, other)?),
            };
            let adaptive = match plan.adaptive {
                AdaptivePlan::None => None,
                AdaptivePlan::SubsetNorm {
                    partition,
                    mode,
                    b0,
                    eps,
                    bias_correction,
                } => {
                    let sn = match mode {
                        AccumulationMode::Cumulative => SubsetNormState::cumulative(partition, b0)?,
                        AccumulationMode::Ema { beta2 } => {
                            SubsetNormState::ema(partition, beta2, bias_correction)?
                        }
                    };
                    Some(AdaptiveState { sn, eps })
                }
            };
            states.push(ParamState {
                rows: p.rows,
                cols: p.cols,
                transposed: plan.transposed,
                momentum,
                adaptive,
            });
        }
        Ok(Optimizer {
            spec,
            params,
            states,
        })
    }

    /// All parameters treated as linear layers of the given shapes.
    pub fn for_shapes(spec: OptimizerSpec, shapes: &[(usize, usize)]) -> Result<Self> {
        let params = shapes
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| ParamSpec::linear(format!("p{i}"), r, c))
            .collect();
        Optimizer::new(spec, params)
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn lr_at(&self, t: u64) -> Result<f64> {
        let total = self.spec.total_steps.unwrap_or(u64::MAX);
        self.spec.schedule.lr_at(self.spec.base_lr, t, total)
    }

    /// Full-space EMA momentum buffer of parameter `i`, if it has one.
    pub fn momentum_buffer(&self, i: usize) -> Option<&Matrix> {
        match &self.states.get(i)?.momentum {
            MomentumState::Ema { buf, .. } => Some(buf),
            _ => None,
        }
    }

    pub fn subspace_state(&self, i: usize) -> Option<&SubspaceMomentumState> {
        match &self.states.get(i)?.momentum {
            MomentumState::Subspace(s) => Some(s),
            _ => None,
        }
    }

    pub fn galore_state(&self, i: usize) -> Option<&GaloreState> {
        match &self.states.get(i)?.momentum {
            MomentumState::Galore(s) => Some(s),
            _ => None,
        }
    }

    pub fn subset_norm_state(&self, i: usize) -> Option<&SubsetNormState> {
        self.states.get(i)?.adaptive.as_ref().map(|a| &a.sn)
    }

    /// Counts the buffers actually held.
    pub fn state_size(&self) -> StateSize {
        let params = self
            .params
            .iter()
            .zip(&self.states)
            .map(|(p, s)| {
                let (momentum, mut second_moment, frame) = match &s.momentum {
                    MomentumState::None => (0, 0, 0),
                    MomentumState::Ema { buf, .. } => (buf.len(), 0, 0),
                    MomentumState::Subspace(sm) => (sm.momentum().len(), 0, sm.frame_elements()),
                    MomentumState::Galore(g) => (
                        g.first_moment().len(),
                        g.second_moment().len(),
                        g.frame_elements(),
                    ),
                };
                if let Some(a) = &s.adaptive {
                    second_moment += a.sn.element_count();
                }
                ParamStateSize {
                    name: p.name.clone(),
                    momentum,
                    second_moment,
                    frame,
                }
            })
            .collect();
        StateSize::from_params(params)
    }

    fn validate_inputs(&self, params: &[Matrix], grads: &[Matrix], t: u64) -> Result<()> {
        if t == 0 {
            return Err(Error::invalid("steps are counted from t = 1"));
        }
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::shape(
                "optimizer step",
                format!("{} parameters", self.states.len()),
                format!("{} params, {} grads", params.len(), grads.len()),
            ));
        }
        for (i, ((x, g), s)) in params.iter().zip(grads).zip(&self.states).enumerate() {
            if x.shape() != (s.rows, s.cols) || g.shape() != (s.rows, s.cols) {
                return Err(Error::shape(
                    "optimizer step",
                    format!("{}x{} for parameter {i}", s.rows, s.cols),
                    format!("param {:?}, grad {:?}", x.shape(), g.shape()),
                ));
            }
            if let Some((index, &value)) = g
                .as_slice()
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite())
            {
                return Err(Error::NonFiniteGradient {
                    param: i,
                    index,
                    value,
                });
            }
        }
        Ok(())
    }

    /// One update of every parameter. On error no parameter is modified
    /// unless the failure happens inside a parameter's own update.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], t: u64) -> Result<StepInfo> {
        self.validate_inputs(params, grads, t)?;
        let lr = self.lr_at(t)?;
        let (grads, grad_norm_sq, clip_scale): (Cow<[Matrix]>, f64, f64) = match self.spec.clip_norm
        {
            Some(max_norm) => {
                let mut owned = grads.to_vec();
                let (n, s) = global_clip(&mut owned, max_norm);
                (Cow::Owned(owned), n, s)
            }
            None => (
                Cow::Borrowed(grads),
                grads.iter().map(Matrix::frobenius_norm_sq).sum(),
                1.0,
            ),
        };
        let wd = self.spec.weight_decay;
        let reduction = self.spec.sn_reduction;
        let total: usize = params.iter().map(Matrix::len).sum();
        let update = |((state, x), g): ((&mut ParamState, &mut Matrix), &Matrix)| {
            update_param(state, x, g, t, lr, wd, reduction)
        };
        if self.states.len() > 1 && total >= PARALLEL_THRESHOLD {
            self.states
                .par_iter_mut()
                .zip(params.par_iter_mut())
                .zip(grads.par_iter())
                .try_for_each(update)?;
        } else {
            self.states
                .iter_mut()
                .zip(params.iter_mut())
                .zip(grads.iter())
                .try_for_each(update)?;
        }
        Ok(StepInfo {
            lr,
            grad_norm_sq,
            clip_scale,
        })
    }
}

fn oriented<'a>(g: &'a Matrix, transposed: bool) -> Cow<'a, Matrix> {
    if transposed {
        Cow::Owned(g.transpose())
    } else {
        Cow::Borrowed(g)
    }
}

fn update_param(
    state: &mut ParamState,
    x: &mut Matrix,
    g: &Matrix,
    t: u64,
    lr: f64,
    wd: f64,
    reduction: SnReduction,
) -> Result<()> {
    let transposed = state.transposed;
    let direction: Cow<Matrix> = match &mut state.momentum {
        MomentumState::None => Cow::Borrowed(g),
        MomentumState::Ema {
            buf,
            beta1,
            dampening,
        } => {
            let beta = *beta1;
            let gain = if *dampening { 1.0 - beta } else { 1.0 };
            for (m, gv) in buf.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *m = beta * *m + gain * gv;
            }
            Cow::Borrowed(&*buf)
        }
        MomentumState::Subspace(sm) => {
            let d = sm.step(&oriented(g, transposed), t)?;
            Cow::Owned(if transposed { d.transpose() } else { d })
        }
        MomentumState::Galore(gl) => {
            let d = gl.step(&oriented(g, transposed), t)?;
            Cow::Owned(if transposed { d.transpose() } else { d })
        }
    };
    let dir = direction.as_slice();
    let xs = x.as_mut_slice();
    match &mut state.adaptive {
        None => {
            for (xj, dj) in xs.iter_mut().zip(dir) {
                let old = *xj;
                *xj -= lr * dj;
                if wd > 0.0 {
                    *xj -= lr * wd * old;
                }
            }
        }
        Some(AdaptiveState { sn, eps }) => {
            sn.accumulate_gradient(g.as_slice(), reduction)?;
            let den = sn.denominators(*eps)?;
            let partition = sn.partition();
            for (j, (xj, dj)) in xs.iter_mut().zip(dir).enumerate() {
                let old = *xj;
                *xj -= lr * dj / den[partition.subset_of(j)];
                if wd > 0.0 {
                    *xj -= lr * wd * old;
                }
            }
        }
    }
    Ok(())
}
