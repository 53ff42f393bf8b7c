use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate schedule as a multiplier profile over the base rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Schedule {
    Constant,
    /// Linear warmup over `ceil(warmup_frac · T)` steps, then cosine decay to
    /// `floor_frac · η` at `t = T`.
    CosineWarmup {
        warmup_frac: f64,
        floor_frac: f64,
    },
}

impl Schedule {
    /// 10% warmup, decay to 10% of the peak.
    pub const STANDARD: Schedule = Schedule::CosineWarmup {
        warmup_frac: 0.1,
        floor_frac: 0.1,
    };

    pub fn needs_total_steps(&self) -> bool {
        matches!(self, Schedule::CosineWarmup { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let Schedule::CosineWarmup {
            warmup_frac,
            floor_frac,
        } = *self
        {
            if !(0.0..=1.0).contains(&warmup_frac) || !(0.0..=1.0).contains(&floor_frac) {
                return Err(Error::invalid(format!(
                    "warmup_frac = {warmup_frac} and floor_frac = {floor_frac} must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Learning rate at step `t` of `total` (both 1-based).
    pub fn lr_at(&self, eta: f64, t: u64, total: u64) -> Result<f64> {
        if t == 0 || t > total {
            return Err(Error::invalid(format!("step {t} outside 1..={total}")));
        }
        match *self {
            Schedule::Constant => Ok(eta),
            Schedule::CosineWarmup {
                warmup_frac,
                floor_frac,
            } => {
                let warmup = (warmup_frac * total as f64).ceil() as u64;
                if t <= warmup {
                    return Ok(eta * t as f64 / warmup as f64);
                }
                let progress = (t - warmup) as f64 / (total - warmup) as f64;
                let cosine = 0.5 * (1.0 + (PI * progress).cos());
                Ok(floor_frac * eta + (1.0 - floor_frac) * eta * cosine)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant() {
        for t in 1..=10 {
            assert_eq!(Schedule::Constant.lr_at(0.3, t, 10).unwrap(), 0.3);
        }
    }

    #[test]
    fn boundaries() {
        let s = Schedule::STANDARD;
        assert_eq!(s.lr_at(2.0, 100, 1000).unwrap(), 2.0);
        assert_eq!(s.lr_at(2.0, 1000, 1000).unwrap(), 0.2);
        assert!((s.lr_at(2.0, 50, 1000).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.lr_at(2.0, 0, 1000).is_err());
        assert!(s.lr_at(2.0, 1001, 1000).is_err());
    }

    #[test]
    fn monotone_after_warmup() {
        let s = Schedule::STANDARD;
        let lrs: Vec<f64> = (100..=1000)
            .map(|t| s.lr_at(1.0, t, 1000).unwrap())
            .collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn full_warmup_reaches_peak_at_end() {
        let s = Schedule::CosineWarmup {
            warmup_frac: 1.0,
            floor_frac: 0.0,
        };
        assert_eq!(s.lr_at(1.0, 10, 10).unwrap(), 1.0);
    }
}
