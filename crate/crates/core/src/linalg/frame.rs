//! Rank-k frames `P: R^m -> R^k` and their adjoints.
//!
//! A frame acts on the row dimension of an `m × n` matrix: `project` maps
//! `G ↦ P G` (`k × n`) and `lift` maps `C ↦ P* C` (`m × n`). Except for
//! [`FrameKind::GaussianRaw`], every frame has orthonormal rows, so
//! `P* P` is the orthogonal projector onto `rowspan(P)`.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hadamard::fwht;
use super::rng::{derive_seed, gaussian_matrix, rng_from_seed};
use super::svd::{
    orthonormal_columns, randomized_range_svd, topk_svd, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS,
};
use super::Matrix;
use crate::error::{Error, Result};

const SIGN_STREAM: u64 = 1;
const ROW_STREAM: u64 = 2;
const COMPLETION_STREAM: u64 = 3;
const GAUSSIAN_STREAM: u64 = 4;
const SKETCH_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// Top-k left singular vectors of a reference gradient.
    Svd,
    /// Randomized range-finder approximation of [`FrameKind::Svd`].
    ApproxSvd,
    /// Orthonormalized dense Gaussian rows.
    GaussianOrtho,
    /// Dense Gaussian rows scaled by `1/sqrt(k)`; not a projector.
    GaussianRaw,
    /// Subsampled randomized Hadamard transform.
    Srht,
    /// `k` coordinates sampled uniformly without replacement.
    RowSubset,
    /// The `k` rows of the reference gradient with the largest norms.
    TopKRows,
    Identity,
    Zero,
}

impl FrameKind {
    pub const ALL: [FrameKind; 9] = [
        FrameKind::Svd,
        FrameKind::ApproxSvd,
        FrameKind::GaussianOrtho,
        FrameKind::GaussianRaw,
        FrameKind::Srht,
        FrameKind::RowSubset,
        FrameKind::TopKRows,
        FrameKind::Identity,
        FrameKind::Zero,
    ];

    pub fn needs_reference(self) -> bool {
        matches!(
            self,
            FrameKind::Svd | FrameKind::ApproxSvd | FrameKind::TopKRows
        )
    }

    /// `false` only for [`FrameKind::GaussianRaw`].
    pub fn is_projector(self) -> bool {
        self != FrameKind::GaussianRaw
    }

    /// Number of reals a frame of this kind keeps in memory.
    ///
    /// Seeded kinds that can be regenerated cheaply (SRHT signs) only store
    /// their sampled indices.
    pub fn storage_elements(self, m: usize, k: usize) -> usize {
        if k == 0 {
            return 0;
        }
        match self {
            FrameKind::Svd
            | FrameKind::ApproxSvd
            | FrameKind::GaussianOrtho
            | FrameKind::GaussianRaw => k * m,
            FrameKind::Srht if m.is_power_of_two() => k,
            FrameKind::Srht => k * m,
            FrameKind::RowSubset | FrameKind::TopKRows => k,
            FrameKind::Identity | FrameKind::Zero => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Svd => "svd",
            FrameKind::ApproxSvd => "approx_svd",
            FrameKind::GaussianOrtho => "gaussian_ortho",
            FrameKind::GaussianRaw => "gaussian_raw",
            FrameKind::Srht => "srht",
            FrameKind::RowSubset => "row_subset",
            FrameKind::TopKRows => "top_k_rows",
            FrameKind::Identity => "identity",
            FrameKind::Zero => "zero",
        }
    }
}

impl std::str::FromStr for FrameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        FrameKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .or(match norm.as_str() {
                "appx_svd" | "approxsvd" => Some(FrameKind::ApproxSvd),
                "gaussian" => Some(FrameKind::GaussianOrtho),
                "random_rows" => Some(FrameKind::RowSubset),
                "topk" | "top_k" => Some(FrameKind::TopKRows),
                _ => None,
            })
            .ok_or_else(|| Error::invalid(format!("unknown frame kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// Explicit `k × m` rows.
    Dense(Matrix),
    /// Sorted coordinate indices.
    Selector(Vec<usize>),
    /// Signs are regenerated from the frame seed; `rows` index the padded transform.
    Srht {
        padded: usize,
        rows: Vec<usize>,
    },
    Identity,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    kind: FrameKind,
    ambient: usize,
    rank: usize,
    seed: u64,
    repr: Repr,
}

impl Frame {
    pub(crate) fn from_dense_rows(kind: FrameKind, rows: Matrix, seed: u64) -> Frame {
        Frame {
            kind,
            ambient: rows.cols(),
            rank: rows.rows(),
            seed,
            repr: Repr::Dense(rows),
        }
    }

    pub fn identity(m: usize) -> Frame {
        Frame {
            kind: FrameKind::Identity,
            ambient: m,
            rank: m,
            seed: 0,
            repr: Repr::Identity,
        }
    }

    pub fn zero(m: usize) -> Frame {
        Frame {
            kind: FrameKind::Zero,
            ambient: m,
            rank: 0,
            seed: 0,
            repr: Repr::Zero,
        }
    }

    /// Coordinate selector onto `indices` (deduplicated and sorted).
    pub fn row_subset(m: usize, indices: &[usize]) -> Result<Frame> {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != indices.len() || idx.last().is_some_and(|&i| i >= m) {
            return Err(Error::invalid(format!(
                "row subset indices must be distinct and < {m}"
            )));
        }
        Ok(Frame {
            kind: FrameKind::RowSubset,
            ambient: m,
            rank: idx.len(),
            seed: 0,
            repr: Repr::Selector(idx),
        })
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_projector(&self) -> bool {
        self.kind.is_projector()
    }

    /// Selected coordinates for selector frames.
    pub fn indices(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Selector(idx) => Some(idx),
            _ => None,
        }
    }

    pub fn stored_elements(&self) -> usize {
        match &self.repr {
            Repr::Dense(rows) => rows.len(),
            Repr::Selector(idx) => idx.len(),
            Repr::Srht { rows, .. } => rows.len(),
            Repr::Identity | Repr::Zero => 0,
        }
    }

    fn check_rows(&self, g: &Matrix, expected: usize, context: &'static str) -> Result<()> {
        if g.rows() != expected {
            return Err(Error::shape(context, format!("{expected} rows"), g.rows()));
        }
        Ok(())
    }

    fn srht_signs(&self) -> Vec<f64> {
        let mut rng = rng_from_seed(derive_seed(self.seed, SIGN_STREAM));
        (0..self.ambient)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }

    /// `P G`, a `k × n` matrix.
    pub fn project(&self, g: &Matrix) -> Result<Matrix> {
        self.check_rows(g, self.ambient, "Frame::project")?;
        let n = g.cols();
        match &self.repr {
            Repr::Identity => Ok(g.clone()),
            Repr::Zero => Ok(Matrix::zeros(0, n)),
            Repr::Dense(rows) => rows.matmul(g),
            Repr::Selector(idx) => {
                let mut out = Matrix::zeros(idx.len(), n);
                for (r, &i) in idx.iter().enumerate() {
                    out.row_mut(r).copy_from_slice(g.row(i));
                }
                Ok(out)
            }
            Repr::Srht { padded, rows } => {
                let signs = self.srht_signs();
                let scale = 1.0 / (*padded as f64).sqrt();
                let mut out = Matrix::zeros(rows.len(), n);
                let mut buf = vec![0.0; *padded];
                for j in 0..n {
                    buf.fill(0.0);
                    for i in 0..self.ambient {
                        buf[i] = signs[i] * g.get(i, j);
                    }
                    fwht(&mut buf);
                    for (r, &row) in rows.iter().enumerate() {
                        out.set(r, j, buf[row] * scale);
                    }
                }
                Ok(out)
            }
        }
    }

    /// `P* C`, an `m × n` matrix.
    pub fn lift(&self, c: &Matrix) -> Result<Matrix> {
        self.check_rows(c, self.rank, "Frame::lift")?;
        let n = c.cols();
        match &self.repr {
            Repr::Identity => Ok(c.clone()),
            Repr::Zero => Ok(Matrix::zeros(self.ambient, n)),
            Repr::Dense(rows) => rows.t_matmul(c),
            Repr::Selector(idx) => {
                let mut out = Matrix::zeros(self.ambient, n);
                for (r, &i) in idx.iter().enumerate() {
                    out.row_mut(i).copy_from_slice(c.row(r));
                }
                Ok(out)
            }
            Repr::Srht { padded, rows } => {
                let signs = self.srht_signs();
                let scale = 1.0 / (*padded as f64).sqrt();
                let mut out = Matrix::zeros(self.ambient, n);
                let mut buf = vec![0.0; *padded];
                for j in 0..n {
                    buf.fill(0.0);
                    for (r, &row) in rows.iter().enumerate() {
                        buf[row] = c.get(r, j);
                    }
                    fwht(&mut buf);
                    // padded coordinates are dropped
                    for i in 0..self.ambient {
                        out.set(i, j, signs[i] * buf[i] * scale);
                    }
                }
                Ok(out)
            }
        }
    }

    /// The frame as an explicit `k × m` matrix.
    pub fn dense_rows(&self) -> Matrix {
        match &self.repr {
            Repr::Dense(rows) => rows.clone(),
            Repr::Identity => Matrix::identity(self.ambient),
            _ => self
                .project(&Matrix::identity(self.ambient))
                .expect("identity has ambient rows"),
        }
    }

    /// `P* P` as an explicit `m × m` matrix.
    pub fn projector(&self) -> Matrix {
        self.lift(&self.dense_rows())
            .expect("dense rows have rank rows")
    }
}

/// Extends orthonormal rows `base` (`k0 × m`) to `k` orthonormal rows with
/// seeded Gaussian directions.
fn complete_rows(base: &Matrix, k: usize, seed: u64) -> Matrix {
    let m = base.cols();
    let k0 = base.rows();
    let mut rng = rng_from_seed(derive_seed(seed, COMPLETION_STREAM));
    let extra = gaussian_matrix(m, k - k0, &mut rng);
    let cols = DMatrix::from_fn(m, k, |i, j| {
        if j < k0 {
            base.get(j, i)
        } else {
            extra.get(i, j - k0)
        }
    });
    let q = orthonormal_columns(cols);
    Matrix::from_fn(k, m, |i, j| q[(j, i)])
}

fn reference(kind: FrameKind, m: usize, reference_grad: Option<&Matrix>) -> Result<&Matrix> {
    let g = reference_grad.ok_or(Error::MissingReferenceGradient(kind))?;
    if g.rows() != m {
        return Err(Error::shape(
            "make_frame reference gradient",
            format!("{m} rows"),
            g.rows(),
        ));
    }
    Ok(g)
}

/// Builds a rank-`k` frame over an ambient dimension `m`.
///
/// `Svd`, `ApproxSvd` and `TopKRows` read `reference_grad` (`m × n`). When
/// `k` exceeds `min(m, n)` the SVD kinds complete the singular subspace with
/// seeded orthonormal directions. `k = 0` always yields a zero frame.
pub fn make_frame(
    kind: FrameKind,
    m: usize,
    k: usize,
    seed: u64,
    reference_grad: Option<&Matrix>,
) -> Result<Frame> {
    if k > m {
        return Err(Error::invalid(format!(
            "frame rank {k} exceeds ambient dimension {m}"
        )));
    }
    match kind {
        FrameKind::Identity => {
            if k != m {
                return Err(Error::invalid(format!(
                    "identity frame needs k = m = {m}, got {k}"
                )));
            }
            return Ok(Frame::identity(m));
        }
        FrameKind::Zero => {
            if k != 0 {
                return Err(Error::invalid(format!("zero frame needs k = 0, got {k}")));
            }
            return Ok(Frame::zero(m));
        }
        _ if k == 0 => return Ok(Frame::zero(m)),
        _ => {}
    }

    let frame = match kind {
        FrameKind::Svd | FrameKind::ApproxSvd => {
            let g = reference(kind, m, reference_grad)?;
            let limit = m.min(g.cols());
            let k_svd = k.min(limit);
            let mut frame = if kind == FrameKind::Svd {
                topk_svd(g, k_svd)?
            } else {
                let oversample = DEFAULT_OVERSAMPLE.min(limit - k_svd);
                randomized_range_svd(
                    g,
                    k_svd,
                    oversample,
                    DEFAULT_POWER_ITERS,
                    derive_seed(seed, SKETCH_STREAM),
                )?
            };
            if k_svd < k {
                frame.repr = Repr::Dense(complete_rows(&frame.dense_rows(), k, seed));
                frame.rank = k;
            }
            frame.seed = seed;
            frame
        }
        FrameKind::GaussianOrtho => {
            let mut rng = rng_from_seed(derive_seed(seed, GAUSSIAN_STREAM));
            let q = orthonormal_columns(gaussian_matrix(m, k, &mut rng).to_nalgebra());
            Frame::from_dense_rows(kind, Matrix::from_fn(k, m, |i, j| q[(j, i)]), seed)
        }
        FrameKind::GaussianRaw => {
            let mut rng = rng_from_seed(derive_seed(seed, GAUSSIAN_STREAM));
            let rows = gaussian_matrix(k, m, &mut rng).scale(1.0 / (k as f64).sqrt());
            Frame::from_dense_rows(kind, rows, seed)
        }
        FrameKind::Srht => {
            let padded = m.next_power_of_two();
            let mut rng = rng_from_seed(derive_seed(seed, ROW_STREAM));
            let mut rows = sample(&mut rng, padded, k).into_vec();
            rows.sort_unstable();
            let frame = Frame {
                kind,
                ambient: m,
                rank: k,
                seed,
                repr: Repr::Srht { padded, rows },
            };
            if padded == m {
                frame
            } else {
                // Truncating the padded transform loses row orthonormality;
                // restore it explicitly.
                let truncated = frame.dense_rows();
                let q = orthonormal_columns(truncated.transpose().to_nalgebra());
                Frame::from_dense_rows(kind, Matrix::from_fn(k, m, |i, j| q[(j, i)]), seed)
            }
        }
        FrameKind::RowSubset => {
            let mut rng = rng_from_seed(derive_seed(seed, ROW_STREAM));
            let idx = sample(&mut rng, m, k).into_vec();
            let mut frame = Frame::row_subset(m, &idx)?;
            frame.seed = seed;
            frame
        }
        FrameKind::TopKRows => {
            let g = reference(kind, m, reference_grad)?;
            let norms = g.row_norms();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
            order.truncate(k);
            let mut frame = Frame::row_subset(m, &order)?;
            frame.kind = FrameKind::TopKRows;
            frame.seed = seed;
            frame
        }
        FrameKind::Identity | FrameKind::Zero => unreachable!("handled above"),
    };
    Ok(frame)
}
