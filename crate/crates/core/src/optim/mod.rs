//! Momentum × adaptive-step optimizer template with named presets.
//!
//! Each parameter gets a momentum component (none, EMA, subspace, or the
//! GaLore baseline) and an adaptive component (none or a Subset-Norm
//! accumulator; coordinate-wise and norm-wise AdaGrad/Adam are the `c = d`
//! and `c = 1` partitions). The update is
//! `x ← x − η_t · direction / denominator − η_t · wd · x`.

mod accounting;
mod optimizer;
mod schedule;
mod spec;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use accounting::{state_size_for, ParamStateSize, StateSize};
pub use optimizer::{global_clip, Optimizer, StepInfo};
pub use schedule::Schedule;
pub use spec::{
    Adaptive, Momentum, OptimizerSpec, Overrides, Preset, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_LR,
    DEFAULT_RANK, DEFAULT_REFRESH_GAP,
};

/// Module class of a parameter. Only `Linear` parameters get the
/// subset-norm and subspace treatment; the rest fall back to the
/// coordinate-wise counterpart of the chosen optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamClass {
    Linear,
    Embedding,
    Norm,
    Other,
}

impl ParamClass {
    pub fn name(self) -> &'static str {
        match self {
            ParamClass::Linear => "linear",
            ParamClass::Embedding => "embedding",
            ParamClass::Norm => "norm",
            ParamClass::Other => "other",
        }
    }
}

impl fmt::Display for ParamClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ParamClass::Linear),
            "embedding" => Ok(ParamClass::Embedding),
            "norm" => Ok(ParamClass::Norm),
            "other" => Ok(ParamClass::Other),
            _ => Err(Error::invalid(format!("unknown parameter class `{s}`"))),
        }
    }
}

/// Name, shape and class of one parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub class: ParamClass,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, class: ParamClass) -> Self {
        ParamSpec {
            name: name.into(),
            rows,
            cols,
            class,
        }
    }

    pub fn linear(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        ParamSpec::new(name, rows, cols, ParamClass::Linear)
    }

    pub fn numel(&self) -> usize {
        self.rows * self.cols
    }
}

/// Per-step metrics of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: u64,
    pub seed: u64,
    pub loss: f64,
    /// `‖∇f(x_t)‖²` of the true gradient at the iterate before the step.
    pub grad_norm_sq: f64,
    pub lr: f64,
    pub state_elems: usize,
    /// Seconds since the trajectory started; not serialized so that output
    /// files are reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}
