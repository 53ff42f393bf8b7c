//! Top-k left singular subspaces: exact (dense SVD) and randomized range finder.

use nalgebra::linalg::SVD;
use nalgebra::DMatrix;

use super::frame::{Frame, FrameKind};
use super::rng::{gaussian_matrix, rng_from_seed};
use super::Matrix;
use crate::error::{Error, Result};

const SVD_MAX_ITERS: usize = 10_000;

/// Randomized range finder defaults (Halko-style).
pub const DEFAULT_OVERSAMPLE: usize = 8;
pub const DEFAULT_POWER_ITERS: usize = 1;

/// Left singular vectors of `a` as columns, ordered by decreasing singular value.
pub(crate) fn sorted_left_singular(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let svd = SVD::try_new(a.clone(), true, false, f64::EPSILON, SVD_MAX_ITERS).ok_or(
        Error::SvdNotConverged {
            iterations: SVD_MAX_ITERS,
        },
    )?;
    let u = svd
        .u
        .ok_or_else(|| Error::Numeric("SVD did not return left singular vectors".into()))?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));
    let sorted_u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let sorted_sv = order.iter().map(|&i| sv[i]).collect();
    Ok((sorted_u, sorted_sv))
}

/// Orthonormal basis for the column space of `a` (thin Householder QR).
pub(crate) fn orthonormal_columns(a: DMatrix<f64>) -> DMatrix<f64> {
    a.qr().q()
}

fn check_rank(a: &Matrix, k: usize) -> Result<()> {
    let limit = a.rows().min(a.cols());
    if k == 0 || k > limit {
        return Err(Error::invalid(format!(
            "rank k={k} must satisfy 1 <= k <= min(m, n) = {limit}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::Numeric(
            "SVD input contains non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Rows of the returned frame are the top-`k` left singular vectors of `a`.
pub fn topk_svd(a: &Matrix, k: usize) -> Result<Frame> {
    check_rank(a, k)?;
    let (u, _) = sorted_left_singular(&a.to_nalgebra())?;
    let rows = Matrix::from_fn(k, a.rows(), |i, j| u[(j, i)]);
    Ok(Frame::from_dense_rows(FrameKind::Svd, rows, 0))
}

/// Randomized range finder followed by an SVD of the small projected matrix.
///
/// Requires `k + oversample <= min(m, n)`.
pub fn randomized_range_svd(
    a: &Matrix,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<Frame> {
    check_rank(a, k)?;
    let limit = a.rows().min(a.cols());
    if k + oversample > limit {
        return Err(Error::invalid(format!(
            "k + oversample = {} exceeds min(m, n) = {limit}",
            k + oversample
        )));
    }
    let width = k + oversample;
    let an = a.to_nalgebra();
    let omega = gaussian_matrix(a.cols(), width, &mut rng_from_seed(seed)).to_nalgebra();
    let mut q = orthonormal_columns(&an * omega);
    for _ in 0..power_iters {
        let z = orthonormal_columns(an.transpose() * &q);
        q = orthonormal_columns(&an * z);
    }
    let b = q.transpose() * &an;
    let (ub, _) = sorted_left_singular(&b)?;
    let u = q * ub.columns(0, k);
    let rows = Matrix::from_fn(k, a.rows(), |i, j| u[(j, i)]);
    Ok(Frame::from_dense_rows(FrameKind::ApproxSvd, rows, seed))
}
