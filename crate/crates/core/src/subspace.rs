//! Subspace-Momentum and the GaLore-style joint-compression baseline.
//!
//! Subspace-Momentum keeps momentum only for the component of the gradient
//! inside `U = rowspan(P)` and passes the orthogonal residual through
//! unchanged, so the update stays full rank:
//!
//! ```text
//! m_t = β m_{t-1} + (1 − β) P g_t
//! r_t = g_t − P*P g_t
//! d_t = P* m_t + r_t
//! ```
//!
//! Frames act on the row dimension of an `m × n` gradient. At every refresh
//! (every `refresh_gap` steps) the frame is rebuilt and the momentum buffer
//! is reset to zero. The GaLore baseline instead keeps both moments in the
//! projected space, confines its update to `U`, and carries its statistics
//! across refreshes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::rng::derive_seed;
use crate::linalg::{make_frame, Frame, FrameKind, Matrix};

/// Outcome of a refresh check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refresh {
    /// First frame built from the first gradient seen.
    Initial,
    Refreshed,
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceConfig {
    pub frame_kind: FrameKind,
    pub rank: usize,
    /// Steps between frame refreshes; `0` keeps the first frame forever.
    pub refresh_gap: u64,
    pub beta1: f64,
    /// Multiply the new projected gradient by `1 − β₁`.
    pub dampening: bool,
    pub seed: u64,
}

impl SubspaceConfig {
    pub fn new(frame_kind: FrameKind, rank: usize, refresh_gap: u64, beta1: f64) -> Self {
        SubspaceConfig {
            frame_kind,
            rank,
            refresh_gap,
            beta1,
            dampening: true,
            seed: 0,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::invalid(format!(
                "beta1 = {} must lie in [0, 1)",
                self.beta1
            )));
        }
        if self.rank > m {
            return Err(Error::invalid(format!(
                "subspace rank {} exceeds ambient dimension {m}",
                self.rank
            )));
        }
        match self.frame_kind {
            FrameKind::Identity if self.rank != m => Err(Error::invalid(format!(
                "identity frame needs rank = {m}, got {}",
                self.rank
            ))),
            FrameKind::Zero if self.rank != 0 => Err(Error::invalid("zero frame needs rank 0")),
            _ => Ok(()),
        }
    }
}

/// Shared frame lifecycle for both subspace optimizers.
#[derive(Debug, Clone, PartialEq)]
struct FrameSlot {
    kind: FrameKind,
    rank: usize,
    refresh_gap: u64,
    seed: u64,
    ambient: usize,
    frame: Option<Frame>,
    built_at: Option<u64>,
    generation: u64,
}

impl FrameSlot {
    fn build(&mut self, g: &Matrix, t: u64) -> Result<()> {
        let seed = derive_seed(self.seed, t);
        let reference = self.kind.needs_reference().then_some(g);
        self.frame = Some(make_frame(
            self.kind,
            self.ambient,
            self.rank,
            seed,
            reference,
        )?);
        self.built_at = Some(t);
        self.generation += 1;
        Ok(())
    }

    fn maybe_refresh(&mut self, g: &Matrix, t: u64) -> Result<Refresh> {
        if t == 0 {
            return Err(Error::invalid("steps are counted from t = 1"));
        }
        if g.rows() != self.ambient {
            return Err(Error::shape(
                "subspace refresh",
                format!("{} rows", self.ambient),
                g.rows(),
            ));
        }
        // Identity and zero frames never change, so a scheduled refresh is a no-op.
        let fixed = matches!(self.kind, FrameKind::Identity | FrameKind::Zero);
        let due = !fixed && self.refresh_gap > 0 && t % self.refresh_gap == 0;
        match (&self.frame, due) {
            (None, _) => {
                self.build(g, t)?;
                Ok(Refresh::Initial)
            }
            (Some(_), true) => {
                self.build(g, t)?;
                Ok(Refresh::Refreshed)
            }
            (Some(_), false) => Ok(Refresh::Unchanged),
        }
    }

    fn frame(&self) -> Result<&Frame> {
        self.frame.as_ref().ok_or_else(|| {
            Error::invalid("no frame yet; call maybe_refresh with the first gradient")
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceMomentumState {
    config: SubspaceConfig,
    cols: usize,
    slot: FrameSlot,
    m_buf: Matrix,
    steps_since_refresh: u64,
}

impl SubspaceMomentumState {
    /// State for an `m × n` parameter with frames over its `m` rows.
    pub fn new(config: SubspaceConfig, m: usize, n: usize) -> Result<Self> {
        config.validate(m)?;
        Ok(SubspaceMomentumState {
            slot: FrameSlot {
                kind: config.frame_kind,
                rank: config.rank,
                refresh_gap: config.refresh_gap,
                seed: config.seed,
                ambient: m,
                frame: None,
                built_at: None,
                generation: 0,
            },
            m_buf: Matrix::zeros(config.rank, n),
            config,
            cols: n,
            steps_since_refresh: 0,
        })
    }

    /// Starts from a given frame instead of building one from the first gradient.
    pub fn with_frame(config: SubspaceConfig, frame: Frame, n: usize) -> Result<Self> {
        let mut config = config;
        config.frame_kind = frame.kind();
        config.rank = frame.rank();
        let mut state = SubspaceMomentumState::new(config, frame.ambient_dim(), n)?;
        state.slot.frame = Some(frame);
        state.slot.generation = 1;
        Ok(state)
    }

    pub fn config(&self) -> &SubspaceConfig {
        &self.config
    }

    pub fn frame(&self) -> Option<&Frame> {
        self.slot.frame.as_ref()
    }

    /// Number of frames built so far.
    pub fn frame_generation(&self) -> u64 {
        self.slot.generation
    }

    pub fn frame_built_at(&self) -> Option<u64> {
        self.slot.built_at
    }

    /// Projected momentum `m̂_t` (`k × n`).
    pub fn momentum(&self) -> &Matrix {
        &self.m_buf
    }

    pub fn steps_since_refresh(&self) -> u64 {
        self.steps_since_refresh
    }

    pub fn momentum_elements(&self) -> usize {
        self.m_buf.len()
    }

    pub fn frame_elements(&self) -> usize {
        self.config
            .frame_kind
            .storage_elements(self.slot.ambient, self.config.rank)
    }

    /// Builds the first frame, or rebuilds it when `t` is a multiple of the
    /// refresh gap; a rebuild zeroes the momentum buffer.
    pub fn maybe_refresh(&mut self, g: &Matrix, t: u64) -> Result<Refresh> {
        let outcome = self.slot.maybe_refresh(g, t)?;
        if outcome == Refresh::Refreshed {
            self.m_buf.as_mut_slice().fill(0.0);
            self.steps_since_refresh = 0;
        }
        Ok(outcome)
    }

    /// Updates the projected momentum with `g` and returns `P* m_t + r_t`.
    pub fn direction(&mut self, g: &Matrix) -> Result<Matrix> {
        if g.shape() != (self.slot.ambient, self.cols) {
            return Err(Error::shape(
                "sm_direction",
                format!("{}x{}", self.slot.ambient, self.cols),
                format!("{}x{}", g.rows(), g.cols()),
            ));
        }
        let frame = self.slot.frame()?;
        let projected = frame.project(g)?;
        let beta = self.config.beta1;
        let gain = if self.config.dampening {
            1.0 - beta
        } else {
            1.0
        };
        for (m, c) in self
            .m_buf
            .as_mut_slice()
            .iter_mut()
            .zip(projected.as_slice())
        {
            *m = beta * *m + gain * c;
        }
        let residual = g.sub(&frame.lift(&projected)?)?;
        let direction = frame.lift(&self.m_buf)?.add(&residual)?;
        self.steps_since_refresh += 1;
        Ok(direction)
    }

    /// `maybe_refresh` followed by `direction`.
    pub fn step(&mut self, g: &Matrix, t: u64) -> Result<Matrix> {
        self.maybe_refresh(g, t)?;
        self.direction(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaloreConfig {
    pub frame_kind: FrameKind,
    pub rank: usize,
    pub refresh_gap: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub bias_correction: bool,
    pub seed: u64,
}

impl GaloreConfig {
    pub fn new(frame_kind: FrameKind, rank: usize, refresh_gap: u64) -> Self {
        GaloreConfig {
            frame_kind,
            rank,
            refresh_gap,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            bias_correction: true,
            seed: 0,
        }
    }
}

/// Adam in the projected space; the update is `P*(m̂ / (sqrt(v̂) + ε))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaloreState {
    config: GaloreConfig,
    cols: usize,
    slot: FrameSlot,
    m_buf: Matrix,
    v_buf: Matrix,
    step: u64,
}

impl GaloreState {
    pub fn new(config: GaloreConfig, m: usize, n: usize) -> Result<Self> {
        SubspaceConfig {
            frame_kind: config.frame_kind,
            rank: config.rank,
            refresh_gap: config.refresh_gap,
            beta1: config.beta1,
            dampening: true,
            seed: config.seed,
        }
        .validate(m)?;
        if !(config.beta2 > 0.0 && config.beta2 < 1.0) {
            return Err(Error::invalid(format!(
                "beta2 = {} must lie in (0, 1)",
                config.beta2
            )));
        }
        Ok(GaloreState {
            slot: FrameSlot {
                kind: config.frame_kind,
                rank: config.rank,
                refresh_gap: config.refresh_gap,
                seed: config.seed,
                ambient: m,
                frame: None,
                built_at: None,
                generation: 0,
            },
            m_buf: Matrix::zeros(config.rank, n),
            v_buf: Matrix::zeros(config.rank, n),
            config,
            cols: n,
            step: 0,
        })
    }

    pub fn config(&self) -> &GaloreConfig {
        &self.config
    }

    pub fn frame(&self) -> Option<&Frame> {
        self.slot.frame.as_ref()
    }

    pub fn frame_generation(&self) -> u64 {
        self.slot.generation
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.m_buf
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.v_buf
    }

    pub fn frame_elements(&self) -> usize {
        self.config
            .frame_kind
            .storage_elements(self.slot.ambient, self.config.rank)
    }

    /// Rebuilds the frame on schedule; both moments are kept.
    pub fn maybe_refresh(&mut self, g: &Matrix, t: u64) -> Result<Refresh> {
        self.slot.maybe_refresh(g, t)
    }

    pub fn direction(&mut self, g: &Matrix) -> Result<Matrix> {
        if g.shape() != (self.slot.ambient, self.cols) {
            return Err(Error::shape(
                "galore_direction",
                format!("{}x{}", self.slot.ambient, self.cols),
                format!("{}x{}", g.rows(), g.cols()),
            ));
        }
        let frame = self.slot.frame()?;
        let projected = frame.project(g)?;
        let GaloreConfig {
            beta1, beta2, eps, ..
        } = self.config;
        self.step += 1;
        let (c1, c2) = if self.config.bias_correction {
            let t = self.step as f64;
            (1.0 - beta1.powf(t), 1.0 - beta2.powf(t))
        } else {
            (1.0, 1.0)
        };
        let mut update = Matrix::zeros(projected.rows(), projected.cols());
        let moments = self
            .m_buf
            .as_mut_slice()
            .iter_mut()
            .zip(self.v_buf.as_mut_slice().iter_mut());
        for ((u, (m, v)), c) in update
            .as_mut_slice()
            .iter_mut()
            .zip(moments)
            .zip(projected.as_slice())
        {
            *m = beta1 * *m + (1.0 - beta1) * c;
            *v = beta2 * *v + (1.0 - beta2) * c * c;
            *u = (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        frame.lift(&update)
    }

    pub fn step(&mut self, g: &Matrix, t: u64) -> Result<Matrix> {
        self.maybe_refresh(g, t)?;
        self.direction(g)
    }
}
