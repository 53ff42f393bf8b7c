use serde::{Deserialize, Serialize};

use super::spec::{Adaptive, Momentum, OptimizerSpec};
use super::{ParamClass, ParamSpec};
use crate::error::{Error, Result};
use crate::linalg::rng::derive_seed;
use crate::linalg::FrameKind;
use crate::partition::Partition;
use crate::subsetnorm::AccumulationMode;
use crate::subspace::{GaloreConfig, SubspaceConfig};

/// Resolved per-parameter choice after class fallbacks and rank clamping.
#[derive(Debug, Clone)]
pub(super) struct ParamPlan {
    pub momentum: MomentumPlan,
    pub adaptive: AdaptivePlan,
    /// Subspace kinds work on the transpose when `rows < cols`, so frames
    /// always span the larger dimension.
    pub transposed: bool,
}

#[derive(Debug, Clone)]
pub(super) enum MomentumPlan {
    None,
    Ema {
        beta1: f64,
        dampening: bool,
    },
    Subspace {
        config: SubspaceConfig,
        ambient: usize,
        other: usize,
    },
    Galore {
        config: GaloreConfig,
        ambient: usize,
        other: usize,
    },
}

#[derive(Debug, Clone)]
pub(super) enum AdaptivePlan {
    None,
    SubsetNorm {
        partition: Partition,
        mode: AccumulationMode,
        b0: f64,
        eps: f64,
        bias_correction: bool,
    },
}

fn clamp_rank(kind: FrameKind, rank: usize, ambient: usize) -> usize {
    match kind {
        FrameKind::Identity => ambient,
        FrameKind::Zero => 0,
        _ => rank.min(ambient),
    }
}

pub(super) fn plan(spec: &OptimizerSpec, index: usize, p: &ParamSpec) -> Result<ParamPlan> {
    if p.rows == 0 || p.cols == 0 {
        return Err(Error::invalid(format!(
            "parameter `{}` has an empty shape",
            p.name
        )));
    }
    let linear = p.class == ParamClass::Linear;
    let transposed = p.rows < p.cols;
    let (ambient, other) = if transposed {
        (p.cols, p.rows)
    } else {
        (p.rows, p.cols)
    };
    let seed = derive_seed(spec.seed, index as u64);

    let mut adaptive = spec.adaptive;
    let momentum = match spec.momentum {
        Momentum::None => MomentumPlan::None,
        Momentum::Ema { beta1, dampening } => MomentumPlan::Ema { beta1, dampening },
        Momentum::Subspace {
            beta1, dampening, ..
        } if !linear => MomentumPlan::Ema { beta1, dampening },
        Momentum::Subspace {
            frame_kind,
            rank,
            refresh_gap,
            beta1,
            dampening,
        } => MomentumPlan::Subspace {
            config: SubspaceConfig {
                frame_kind,
                rank: clamp_rank(frame_kind, rank, ambient),
                refresh_gap,
                beta1,
                dampening,
                seed,
            },
            ambient,
            other,
        },
        Momentum::Galore {
            beta1,
            beta2,
            eps,
            bias_correction,
            ..
        } if !linear => {
            adaptive = Adaptive::EmaCoordinate {
                beta2,
                eps,
                bias_correction,
            };
            MomentumPlan::Ema {
                beta1,
                dampening: true,
            }
        }
        Momentum::Galore {
            frame_kind,
            rank,
            refresh_gap,
            beta1,
            beta2,
            eps,
            bias_correction,
        } => MomentumPlan::Galore {
            config: GaloreConfig {
                frame_kind,
                rank: clamp_rank(frame_kind, rank, ambient),
                refresh_gap,
                beta1,
                beta2,
                eps,
                bias_correction,
                seed,
            },
            ambient,
            other,
        },
    };

    if !linear {
        adaptive = match adaptive {
            Adaptive::EmaSubsetNorm {
                beta2,
                eps,
                bias_correction,
                ..
            } => Adaptive::EmaCoordinate {
                beta2,
                eps,
                bias_correction,
            },
            Adaptive::AdaGradSubsetNorm { b0, eps, .. } => Adaptive::AdaGradCoordinate { b0, eps },
            other => other,
        };
    }

    let d = p.numel();
    let adaptive = match adaptive {
        Adaptive::None => AdaptivePlan::None,
        Adaptive::EmaCoordinate {
            beta2,
            eps,
            bias_correction,
        } => AdaptivePlan::SubsetNorm {
            partition: Partition::coordinate(d)?,
            mode: AccumulationMode::Ema { beta2 },
            b0: 0.0,
            eps,
            bias_correction,
        },
        Adaptive::EmaSubsetNorm {
            partition,
            beta2,
            eps,
            bias_correction,
        } => AdaptivePlan::SubsetNorm {
            partition: partition.resolve(p.rows, p.cols)?,
            mode: AccumulationMode::Ema { beta2 },
            b0: 0.0,
            eps,
            bias_correction,
        },
        Adaptive::AdaGradCoordinate { b0, eps } => AdaptivePlan::SubsetNorm {
            partition: Partition::coordinate(d)?,
            mode: AccumulationMode::Cumulative,
            b0,
            eps,
            bias_correction: false,
        },
        Adaptive::AdaGradSubsetNorm { partition, b0, eps } => AdaptivePlan::SubsetNorm {
            partition: partition.resolve(p.rows, p.cols)?,
            mode: AccumulationMode::Cumulative,
            b0,
            eps,
            bias_correction: false,
        },
        Adaptive::AdaGradNorm { b0, eps } => AdaptivePlan::SubsetNorm {
            partition: Partition::single(d)?,
            mode: AccumulationMode::Cumulative,
            b0,
            eps,
            bias_correction: false,
        },
    };

    Ok(ParamPlan {
        momentum,
        adaptive,
        transposed,
    })
}

/// State element counts of one parameter. Frames are reported apart from
/// the optimizer state proper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamStateSize {
    pub name: String,
    pub momentum: usize,
    pub second_moment: usize,
    pub frame: usize,
}

impl ParamStateSize {
    pub fn total(&self) -> usize {
        self.momentum + self.second_moment
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSize {
    /// Momentum plus second-moment elements over all parameters.
    pub total: usize,
    pub momentum: usize,
    pub second_moment: usize,
    pub frame: usize,
    pub params: Vec<ParamStateSize>,
}

impl StateSize {
    pub(super) fn from_params(params: Vec<ParamStateSize>) -> StateSize {
        let momentum = params.iter().map(|p| p.momentum).sum();
        let second_moment = params.iter().map(|p| p.second_moment).sum();
        let frame = params.iter().map(|p| p.frame).sum();
        StateSize {
            total: momentum + second_moment,
            momentum,
            second_moment,
            frame,
            params,
        }
    }
}

/// Element counts an optimizer would hold for `params`, computed from
/// shapes alone without allocating any state.
pub fn state_size_for(spec: &OptimizerSpec, params: &[ParamSpec]) -> Result<StateSize> {
    spec.validate()?;
    let mut out = Vec::with_capacity(params.len());
    for (i, p) in params.iter().enumerate() {
        let plan = plan(spec, i, p)?;
        let (momentum, mut second_moment, frame) = match &plan.momentum {
            MomentumPlan::None => (0, 0, 0),
            MomentumPlan::Ema { .. } => (p.numel(), 0, 0),
            MomentumPlan::Subspace {
                config,
                ambient,
                other,
            } => (
                config.rank * other,
                0,
                config.frame_kind.storage_elements(*ambient, config.rank),
            ),
            MomentumPlan::Galore {
                config,
                ambient,
                other,
            } => (
                config.rank * other,
                config.rank * other,
                config.frame_kind.storage_elements(*ambient, config.rank),
            ),
        };
        if let AdaptivePlan::SubsetNorm { partition, .. } = &plan.adaptive {
            second_moment += partition.c();
        }
        out.push(ParamStateSize {
            name: p.name.clone(),
            momentum,
            second_moment,
            frame,
        });
    }
    Ok(StateSize::from_params(out))
}
