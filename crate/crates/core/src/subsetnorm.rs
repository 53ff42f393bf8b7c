//! Subset-Norm second-moment state.
//!
//! Each subset `Ψ_i` of a [`Partition`] shares one accumulator of squared
//! subset norms, in either cumulative (AdaGrad) or EMA (RMSProp/Adam) form.
//! With `c = d` this is coordinate-wise AdaGrad/Adam; with `c = 1` it is
//! AdaGrad-Norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

pub const DEFAULT_B0: f64 = 1e-6;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AccumulationMode {
    /// `b² ← b² + ‖g_Ψ‖²`
    Cumulative,
    /// `v² ← β₂ v² + (1 − β₂) ‖g_Ψ‖²`
    Ema { beta2: f64 },
}

/// How a subset of gradient entries is reduced to one nonnegative number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnReduction {
    /// `Σ g_j²`
    #[default]
    SumOfSquares,
    /// `(Σ g_j)²`, kept only for literal compatibility with a sum-then-square
    /// pseudocode variant.
    SquaredSum,
}

impl SnReduction {
    pub fn reduce(self, partition: &Partition, g: &[f64]) -> Result<Vec<f64>> {
        match self {
            SnReduction::SumOfSquares => partition.subset_sqnorms(g),
            SnReduction::SquaredSum => partition.subset_squared_sums(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetNormState {
    partition: Partition,
    mode: AccumulationMode,
    acc: Vec<f64>,
    b0: Vec<f64>,
    step: u64,
    bias_correction: bool,
}

impl SubsetNormState {
    /// Cumulative accumulator starting at `b0²` in every subset.
    pub fn cumulative(partition: Partition, b0: f64) -> Result<Self> {
        let b0 = vec![b0; partition.c()];
        SubsetNormState::cumulative_with(partition, b0)
    }

    pub fn cumulative_with(partition: Partition, b0: Vec<f64>) -> Result<Self> {
        if b0.len() != partition.c() {
            return Err(Error::shape("SubsetNormState b0", partition.c(), b0.len()));
        }
        if b0.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::invalid("b0 entries must be finite and nonnegative"));
        }
        let acc = b0.iter().map(|b| b * b).collect();
        Ok(SubsetNormState {
            partition,
            mode: AccumulationMode::Cumulative,
            acc,
            b0,
            step: 0,
            bias_correction: false,
        })
    }

    pub fn ema(partition: Partition, beta2: f64, bias_correction: bool) -> Result<Self> {
        if !(beta2 > 0.0 && beta2 < 1.0) {
            return Err(Error::invalid(format!(
                "beta2 = {beta2} must lie in (0, 1)"
            )));
        }
        let c = partition.c();
        Ok(SubsetNormState {
            partition,
            mode: AccumulationMode::Ema { beta2 },
            acc: vec![0.0; c],
            b0: Vec::new(),
            step: 0,
            bias_correction,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn mode(&self) -> AccumulationMode {
        self.mode
    }

    /// `b²` (cumulative) or `v²` (EMA) per subset.
    pub fn acc(&self) -> &[f64] {
        &self.acc
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn bias_correction(&self) -> bool {
        self.bias_correction
    }

    /// Persistent state elements (one per subset).
    pub fn element_count(&self) -> usize {
        self.acc.len()
    }

    pub fn accumulate(&mut self, sqnorms: &[f64]) -> Result<()> {
        if sqnorms.len() != self.acc.len() {
            return Err(Error::shape("sn_accumulate", self.acc.len(), sqnorms.len()));
        }
        if let Some(i) = sqnorms.iter().position(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::Numeric(format!(
                "subset {i} received invalid squared norm {}",
                sqnorms[i]
            )));
        }
        match self.mode {
            AccumulationMode::Cumulative => {
                for (a, s) in self.acc.iter_mut().zip(sqnorms) {
                    *a += s;
                }
            }
            AccumulationMode::Ema { beta2 } => {
                for (a, s) in self.acc.iter_mut().zip(sqnorms) {
                    *a = beta2 * *a + (1.0 - beta2) * s;
                }
            }
        }
        self.step += 1;
        Ok(())
    }

    /// Reduces `g` over the partition and accumulates it.
    pub fn accumulate_gradient(&mut self, g: &[f64], reduction: SnReduction) -> Result<()> {
        let sq = reduction.reduce(&self.partition, g)?;
        self.accumulate(&sq)
    }

    /// Per-subset step denominators `sqrt(acc) + eps` (bias-corrected in EMA
    /// mode when enabled).
    pub fn denominators(&self, eps: f64) -> Result<Vec<f64>> {
        let correction = match self.mode {
            AccumulationMode::Ema { beta2 } if self.bias_correction && self.step > 0 => {
                1.0 - beta2.powf(self.step as f64)
            }
            _ => 1.0,
        };
        let mut out = Vec::with_capacity(self.acc.len());
        for (i, a) in self.acc.iter().enumerate() {
            let den = (a / correction).sqrt() + eps;
            if !(den > 0.0 && den.is_finite()) {
                return Err(Error::Numeric(format!(
                    "subset {i} has denominator {den}; b0 and eps are both zero"
                )));
            }
            out.push(den);
        }
        Ok(out)
    }
}

/// `x_j ← x_j − η·g_j / den_{ψ(j)}` for every coordinate.
pub fn sn_apply(
    x: &mut [f64],
    g: &[f64],
    denoms: &[f64],
    partition: &Partition,
    lr: f64,
) -> Result<()> {
    if x.len() != partition.d() || g.len() != partition.d() {
        return Err(Error::shape(
            "sn_apply",
            partition.d(),
            format!("x: {}, g: {}", x.len(), g.len()),
        ));
    }
    if denoms.len() != partition.c() {
        return Err(Error::shape(
            "sn_apply denominators",
            partition.c(),
            denoms.len(),
        ));
    }
    for (j, (xj, gj)) in x.iter_mut().zip(g).enumerate() {
        *xj -= lr * gj / denoms[partition.subset_of(j)];
    }
    Ok(())
}
