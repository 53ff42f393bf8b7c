use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::error::{Error, Result};
use crate::linalg::FrameKind;
use crate::partition::PartitionRule;
use crate::subsetnorm::{SnReduction, DEFAULT_B0, DEFAULT_EPS};

/// Momentum component of the template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Momentum {
    None,
    /// `m = β m + (1 − β) g` (heavy-ball `m = β m + g` with dampening off).
    /// Never bias-corrected.
    Ema {
        beta1: f64,
        dampening: bool,
    },
    Subspace {
        frame_kind: FrameKind,
        rank: usize,
        refresh_gap: u64,
        beta1: f64,
        dampening: bool,
    },
    /// Joint low-rank compression of both moments; pair with `Adaptive::None`.
    Galore {
        frame_kind: FrameKind,
        rank: usize,
        refresh_gap: u64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        bias_correction: bool,
    },
}

/// Adaptive step-size component of the template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Adaptive {
    None,
    EmaCoordinate {
        beta2: f64,
        eps: f64,
        bias_correction: bool,
    },
    EmaSubsetNorm {
        partition: PartitionRule,
        beta2: f64,
        eps: f64,
        bias_correction: bool,
    },
    AdaGradCoordinate {
        b0: f64,
        eps: f64,
    },
    AdaGradSubsetNorm {
        partition: PartitionRule,
        b0: f64,
        eps: f64,
    },
    AdaGradNorm {
        b0: f64,
        eps: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub momentum: Momentum,
    pub adaptive: Adaptive,
    pub base_lr: f64,
    pub schedule: Schedule,
    /// Needed by schedules that depend on the run length.
    pub total_steps: Option<u64>,
    pub weight_decay: f64,
    /// Global-norm clipping threshold.
    pub clip_norm: Option<f64>,
    pub sn_reduction: SnReduction,
    pub seed: u64,
}

impl OptimizerSpec {
    pub fn new(momentum: Momentum, adaptive: Adaptive, base_lr: f64) -> Self {
        OptimizerSpec {
            momentum,
            adaptive,
            base_lr,
            schedule: Schedule::Constant,
            total_steps: None,
            weight_decay: 0.0,
            clip_norm: None,
            sn_reduction: SnReduction::SumOfSquares,
            seed: 0,
        }
    }

    pub fn preset(preset: Preset) -> Self {
        preset.spec()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} = {v} must be positive and finite"
                )))
            }
        };
        let beta = |name: &str, v: f64, open_low: bool| {
            let ok = if open_low {
                v > 0.0 && v < 1.0
            } else {
                (0.0..1.0).contains(&v)
            };
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} out of range")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} must be nonnegative")))
            }
        };
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} is invalid",
                self.base_lr
            )));
        }
        nonneg("weight_decay", self.weight_decay)?;
        if let Some(c) = self.clip_norm {
            positive("clip_norm", c)?;
        }
        self.schedule.validate()?;
        if self.schedule.needs_total_steps() && self.total_steps.is_none() {
            return Err(Error::invalid("cosine schedule needs total_steps"));
        }
        match self.momentum {
            Momentum::None => {}
            Momentum::Ema { beta1, .. } | Momentum::Subspace { beta1, .. } => {
                beta("beta1", beta1, false)?
            }
            Momentum::Galore {
                beta1, beta2, eps, ..
            } => {
                beta("beta1", beta1, false)?;
                beta("beta2", beta2, true)?;
                nonneg("eps", eps)?;
                if self.adaptive != Adaptive::None {
                    return Err(Error::invalid(
                        "GaLore momentum carries its own second moment; use adaptive = none",
                    ));
                }
            }
        }
        match self.adaptive {
            Adaptive::None => {}
            Adaptive::EmaCoordinate { beta2, eps, .. }
            | Adaptive::EmaSubsetNorm { beta2, eps, .. } => {
                beta("beta2", beta2, true)?;
                nonneg("eps", eps)?;
            }
            Adaptive::AdaGradCoordinate { b0, eps }
            | Adaptive::AdaGradSubsetNorm { b0, eps, .. }
            | Adaptive::AdaGradNorm { b0, eps } => {
                nonneg("b0", b0)?;
                nonneg("eps", eps)?;
                if b0 == 0.0 && eps == 0.0 {
                    return Err(Error::invalid("b0 and eps cannot both be zero"));
                }
            }
        }
        Ok(())
    }

    /// Applies every set field of `o`; fields that do not apply to the
    /// chosen components are rejected.
    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<()> {
        let unused = |name: &str| {
            Error::invalid(format!(
                "override `{name}` does not apply to this optimizer"
            ))
        };
        if let Some(lr) = o.lr {
            self.base_lr = lr;
        }
        if let Some(s) = o.schedule {
            self.schedule = s;
        }
        if let Some(wd) = o.weight_decay {
            self.weight_decay = wd;
        }
        if let Some(c) = o.clip_norm {
            self.clip_norm = Some(c);
        }
        if let Some(r) = o.sn_reduction {
            self.sn_reduction = r;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        match &mut self.momentum {
            Momentum::None => {
                for (name, set) in [
                    ("beta1", o.beta1.is_some()),
                    ("dampening", o.dampening.is_some()),
                    ("rank", o.rank.is_some()),
                    ("refresh_gap", o.refresh_gap.is_some()),
                    ("frame", o.frame.is_some()),
                ] {
                    if set {
                        return Err(unused(name));
                    }
                }
            }
            Momentum::Ema { beta1, dampening } => {
                set(beta1, o.beta1);
                set(dampening, o.dampening);
                if o.rank.is_some() || o.refresh_gap.is_some() || o.frame.is_some() {
                    return Err(unused("rank/refresh_gap/frame"));
                }
            }
            Momentum::Subspace {
                frame_kind,
                rank,
                refresh_gap,
                beta1,
                dampening,
            } => {
                set(frame_kind, o.frame);
                set(rank, o.rank);
                set(refresh_gap, o.refresh_gap);
                set(beta1, o.beta1);
                set(dampening, o.dampening);
            }
            Momentum::Galore {
                frame_kind,
                rank,
                refresh_gap,
                beta1,
                beta2,
                eps,
                bias_correction,
            } => {
                set(frame_kind, o.frame);
                set(rank, o.rank);
                set(refresh_gap, o.refresh_gap);
                set(beta1, o.beta1);
                set(beta2, o.beta2);
                set(eps, o.eps);
                set(bias_correction, o.bias_correction);
                if o.dampening.is_some() {
                    return Err(unused("dampening"));
                }
            }
        }
        let galore = matches!(self.momentum, Momentum::Galore { .. });
        match &mut self.adaptive {
            Adaptive::None => {
                if o.b0.is_some()
                    || o.partition.is_some()
                    || (!galore && (o.beta2.is_some() || o.eps.is_some()))
                {
                    return Err(unused("beta2/eps/b0/partition"));
                }
            }
            Adaptive::EmaCoordinate {
                beta2,
                eps,
                bias_correction,
            } => {
                set(beta2, o.beta2);
                set(eps, o.eps);
                set(bias_correction, o.bias_correction);
                if o.b0.is_some() || o.partition.is_some() {
                    return Err(unused("b0/partition"));
                }
            }
            Adaptive::EmaSubsetNorm {
                partition,
                beta2,
                eps,
                bias_correction,
            } => {
                set(partition, o.partition);
                set(beta2, o.beta2);
                set(eps, o.eps);
                set(bias_correction, o.bias_correction);
                if o.b0.is_some() {
                    return Err(unused("b0"));
                }
            }
            Adaptive::AdaGradCoordinate { b0, eps } | Adaptive::AdaGradNorm { b0, eps } => {
                set(b0, o.b0);
                set(eps, o.eps);
                if o.partition.is_some() || o.beta2.is_some() {
                    return Err(unused("partition/beta2"));
                }
            }
            Adaptive::AdaGradSubsetNorm { partition, b0, eps } => {
                set(partition, o.partition);
                set(b0, o.b0);
                set(eps, o.eps);
                if o.beta2.is_some() {
                    return Err(unused("beta2"));
                }
            }
        }
        self.validate()
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Optional hyperparameter overrides on top of a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub b0: Option<f64>,
    pub dampening: Option<bool>,
    pub bias_correction: Option<bool>,
    pub rank: Option<usize>,
    pub refresh_gap: Option<u64>,
    pub frame: Option<FrameKind>,
    pub partition: Option<PartitionRule>,
    pub schedule: Option<Schedule>,
    pub weight_decay: Option<f64>,
    pub clip_norm: Option<f64>,
    pub sn_reduction: Option<SnReduction>,
    pub seed: Option<u64>,
}

pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_RANK: usize = 128;
pub const DEFAULT_REFRESH_GAP: u64 = 200;

/// Named momentum × adaptive-step combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Preset {
    Adam,
    AdamSN,
    AdamSNSM,
    AdaGrad,
    AdaGradNorm,
    AdaGradSN,
    AdaGradSNSM,
    AdaGradm,
    AdaGradmSN,
    RMSProp,
    RMSPropSN,
    SGD,
    SGDm,
    SgdSM,
    GaLore,
}

impl Preset {
    pub const ALL: [Preset; 15] = [
        Preset::Adam,
        Preset::AdamSN,
        Preset::AdamSNSM,
        Preset::AdaGrad,
        Preset::AdaGradNorm,
        Preset::AdaGradSN,
        Preset::AdaGradSNSM,
        Preset::AdaGradm,
        Preset::AdaGradmSN,
        Preset::RMSProp,
        Preset::RMSPropSN,
        Preset::SGD,
        Preset::SGDm,
        Preset::SgdSM,
        Preset::GaLore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Adam => "Adam",
            Preset::AdamSN => "AdamSN",
            Preset::AdamSNSM => "AdamSNSM",
            Preset::AdaGrad => "AdaGrad",
            Preset::AdaGradNorm => "AdaGradNorm",
            Preset::AdaGradSN => "AdaGradSN",
            Preset::AdaGradSNSM => "AdaGradSNSM",
            Preset::AdaGradm => "AdaGradm",
            Preset::AdaGradmSN => "AdaGradmSN",
            Preset::RMSProp => "RMSProp",
            Preset::RMSPropSN => "RMSPropSN",
            Preset::SGD => "SGD",
            Preset::SGDm => "SGDm",
            Preset::SgdSM => "SGD-SM",
            Preset::GaLore => "GaLore",
        }
    }

    pub fn spec(self) -> OptimizerSpec {
        let ema = Momentum::Ema {
            beta1: DEFAULT_BETA1,
            dampening: true,
        };
        let subspace = Momentum::Subspace {
            frame_kind: FrameKind::Svd,
            rank: DEFAULT_RANK,
            refresh_gap: DEFAULT_REFRESH_GAP,
            beta1: DEFAULT_BETA1,
            dampening: true,
        };
        let adam_coord = Adaptive::EmaCoordinate {
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            bias_correction: true,
        };
        let adam_sn = Adaptive::EmaSubsetNorm {
            partition: PartitionRule::Heuristic2d,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            bias_correction: true,
        };
        let rms_coord = Adaptive::EmaCoordinate {
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            bias_correction: false,
        };
        let rms_sn = Adaptive::EmaSubsetNorm {
            partition: PartitionRule::Heuristic2d,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            bias_correction: false,
        };
        let ada_coord = Adaptive::AdaGradCoordinate {
            b0: DEFAULT_B0,
            eps: 0.0,
        };
        let ada_sn = Adaptive::AdaGradSubsetNorm {
            partition: PartitionRule::Heuristic2d,
            b0: DEFAULT_B0,
            eps: 0.0,
        };
        let (momentum, adaptive) = match self {
            Preset::Adam => (ema, adam_coord),
            Preset::AdamSN => (ema, adam_sn),
            Preset::AdamSNSM => (subspace, adam_sn),
            Preset::AdaGrad => (Momentum::None, ada_coord),
            Preset::AdaGradNorm => (
                Momentum::None,
                Adaptive::AdaGradNorm {
                    b0: DEFAULT_B0,
                    eps: 0.0,
                },
            ),
            Preset::AdaGradSN => (Momentum::None, ada_sn),
            Preset::AdaGradSNSM => (subspace, ada_sn),
            Preset::AdaGradm => (ema, ada_coord),
            Preset::AdaGradmSN => (ema, ada_sn),
            Preset::RMSProp => (Momentum::None, rms_coord),
            Preset::RMSPropSN => (Momentum::None, rms_sn),
            Preset::SGD => (Momentum::None, Adaptive::None),
            Preset::SGDm => (ema, Adaptive::None),
            Preset::SgdSM => (subspace, Adaptive::None),
            Preset::GaLore => (
                Momentum::Galore {
                    frame_kind: FrameKind::Svd,
                    rank: DEFAULT_RANK,
                    refresh_gap: DEFAULT_REFRESH_GAP,
                    beta1: DEFAULT_BETA1,
                    beta2: DEFAULT_BETA2,
                    eps: DEFAULT_EPS,
                    bias_correction: true,
                },
                Adaptive::None,
            ),
        };
        OptimizerSpec::new(momentum, adaptive, DEFAULT_LR)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Preset {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Preset> for String {
    fn from(p: Preset) -> String {
        p.name().to_string()
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Preset::ALL
            .into_iter()
            .find(|p| {
                p.name()
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .collect::<String>()
                    .to_ascii_lowercase()
                    == key
            })
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!(
                    "unknown preset `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            p.spec().validate().unwrap();
        }
        assert_eq!("sgd_sm".parse::<Preset>().unwrap(), Preset::SgdSM);
        assert_eq!("adamsnsm".parse::<Preset>().unwrap(), Preset::AdamSNSM);
        assert!("lion".parse::<Preset>().is_err());
    }

    #[test]
    fn preset_composition() {
        assert!(matches!(
            Preset::AdamSN.spec().momentum,
            Momentum::Ema { .. }
        ));
        assert!(matches!(
            Preset::AdamSN.spec().adaptive,
            Adaptive::EmaSubsetNorm { .. }
        ));
        assert!(matches!(
            Preset::AdamSNSM.spec().momentum,
            Momentum::Subspace { .. }
        ));
        assert!(matches!(
            Preset::AdaGradSNSM.spec().adaptive,
            Adaptive::AdaGradSubsetNorm { .. }
        ));
        assert!(matches!(Preset::RMSPropSN.spec().momentum, Momentum::None));
        assert!(matches!(Preset::SgdSM.spec().adaptive, Adaptive::None));
    }

    #[test]
    fn overrides_apply_and_reject() {
        let mut spec = Preset::AdamSNSM.spec();
        let o = Overrides {
            rank: Some(4),
            lr: Some(0.01),
            frame: Some(FrameKind::Srht),
            ..Default::default()
        };
        spec.apply_overrides(&o).unwrap();
        assert_eq!(spec.base_lr, 0.01);
        assert!(matches!(
            spec.momentum,
            Momentum::Subspace {
                rank: 4,
                frame_kind: FrameKind::Srht,
                ..
            }
        ));
        let mut sgd = Preset::SGD.spec();
        assert!(sgd
            .apply_overrides(&Overrides {
                beta1: Some(0.5),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn galore_requires_no_adaptive() {
        let mut spec = Preset::GaLore.spec();
        spec.adaptive = Preset::Adam.spec().adaptive;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn overrides_parse_from_json() {
        let o: Overrides =
            serde_json::from_str(r#"{"lr": 0.5, "partition": {"rule": "equipartition", "k": 4}}"#)
                .unwrap();
        assert_eq!(o.partition, Some(PartitionRule::Equipartition { k: 4 }));
        assert!(serde_json::from_str::<Overrides>(r#"{"learning_rate": 1}"#).is_err());
    }
}
